"""Sparse-sensor field reconstruction and forecasting.

Voronoi-tessellated sensor observations feed a convolutional
encoder-decoder with a latent LSTM, or a ConvLSTM, optionally trained with
an energy-conservation penalty; Kriging baselines and a shallow-water
simulator complete the pipeline.
"""
from dsovt.data import Field, FieldSequence, NormStats, denormalize, normalize, read_tensor, write_tensor
from dsovt.errors import DsovtError, NumericalError, ValidationError
from dsovt.kernels import BACKEND
from dsovt.manifest import ExperimentManifest, load_manifest
from dsovt.sensors import SensorFrame, SensorSeries, VoronoiField, observe, tessellate
from dsovt.swe import SWEScenario, SWEState, generate_dataset, simulate

__version__ = "0.1.0"

__all__ = [
    "Field", "FieldSequence", "NormStats", "normalize", "denormalize", "read_tensor", "write_tensor",
    "DsovtError", "NumericalError", "ValidationError", "BACKEND", "ExperimentManifest",
    "load_manifest", "SensorFrame", "SensorSeries", "VoronoiField", "observe", "tessellate",
    "SWEScenario", "SWEState", "generate_dataset", "simulate",
]
