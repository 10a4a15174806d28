"""Network digital twin traffic synchronization: replay, forecast, correct."""

from .ingest import (
    PacketRecord,
    SyntheticProfile,
    TrafficSeries,
    bucketize,
    generate,
    parse_pcap,
    read_csv,
    write_csv,
)
from .pid import AutoTuner, PidController, PidGains, apply_correction
from .predictor import CnnConfig, CnnModel, evaluate, load_model, save_model, train
from .series import Normalizer, SplitSpec, fit_normalizer, make_windows, split
from .synchronizer import ReplaySession, SyncTick, run_offline, run_session, sweep_gains

__version__ = "0.1.0"
