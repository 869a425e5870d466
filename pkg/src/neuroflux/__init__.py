"""EEG-fNIRS fused connectivity analysis.

Modules
-------
core      shared data types and serialization
dsp       filters, smoothing, resampling, analytic signal, z-scoring
wavelet   db2 discrete wavelet transform
mbll      optical density to hemoglobin conversion
pipeline  preprocessing, epoching, region tracks and fusion
fc        PCC, PLV and MSC
ec        MVAR fitting, gPDC and dDTF
stats     Wilcoxon signed-rank tests on matrices
synth     ground-truth generators
"""

from .core import (CONVENTION, REGION_IDS, Channel, Condition, ConnectivityMatrix, EpochSet,
                   Metric, Modality, MultichannelSeries, PValueMatrix, Region, RegionMap,
                   StimulusClass, TimeSeries, from_json, to_json, validate)
from .errors import NeurofluxError

__version__ = "0.1.0"

__all__ = ["CONVENTION", "REGION_IDS", "Channel", "Condition", "ConnectivityMatrix", "EpochSet",
           "Metric", "Modality", "MultichannelSeries", "PValueMatrix", "Region", "RegionMap",
           "StimulusClass", "TimeSeries", "from_json", "to_json", "validate", "NeurofluxError"]
