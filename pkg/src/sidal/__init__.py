"""Gaussian-process active learning under self-induced Boltzmann distributions."""

from .acquisition import AcquisitionResult, AcquisitionSpec
from .benchmarks import Benchmark, Domain, get_benchmark, list_benchmarks
from .campaign import Campaign, CampaignConfig, CampaignRecord, run_campaign
from .estimators import SIDActiveLearner
from .gp import Dataset, GaussianProcess, GpPosterior
from .kernels import KernelSpec
from .sid import BoltzmannSpec, SurrogateDensity
from .smc import ParticleSet, SmcConfig

__version__ = "0.1.0"
