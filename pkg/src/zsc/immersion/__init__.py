"""Chart-based geometry of the catalog hypersurfaces."""

from .chart import ChartBatch, ChartSample, chart_batch, chart_sample
from .models import (
    CircleCylinder, CylinderModel, GraphModel, ImmersionModel, RotationalModel,
    SchwarzschildModel, circle_cylinder, graph, interior_points, model_from_dict, schwarzschild,
)
