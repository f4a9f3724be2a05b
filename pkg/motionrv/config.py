"""Configuration management for motionrv"""

from dataclasses import asdict, dataclass, fields
from typing import TYPE_CHECKING, Any

from motionrv.constants import (DEFAULT_BAND_HIGH_HZ, DEFAULT_BAND_LOW_HZ,
                                DEFAULT_BAND_ORDER, DEFAULT_PHYSIO_COLUMN,
                                DEFAULT_PHYSIO_RATE_HZ, DEFAULT_RV_WINDOW_S,
                                DEFAULT_STRIDE, DEFAULT_TR_S,
                                DEFAULT_WINDOW_LEN)

if TYPE_CHECKING:
    from motionrv.dataset import WindowSpec
    from motionrv.filters import BandSpec
    from motionrv.nn.train import TrainConfig


@dataclass
class MotionRvConfig:
    r"""Configuration for the RV reconstruction pipeline"""
    # Acquisition
    tr_s: float = DEFAULT_TR_S
    physio_rate_hz: float = DEFAULT_PHYSIO_RATE_HZ
    physio_column: int = DEFAULT_PHYSIO_COLUMN

    # RV ground truth
    rv_window_s: float = DEFAULT_RV_WINDOW_S
    rv_ddof: int = 0

    # Windowing
    window_len: int = DEFAULT_WINDOW_LEN
    stride: int = DEFAULT_STRIDE

    # Respiratory band for the filtered-motion arm
    band_low_hz: float = DEFAULT_BAND_LOW_HZ
    band_high_hz: float = DEFAULT_BAND_HIGH_HZ
    band_order: int = DEFAULT_BAND_ORDER
    band_kind: str = "bandpass"

    # Splits
    train_fraction: float = 0.8
    validation_fraction: float = 0.2

    # Training
    epochs: int = 100
    batch_size: int = 64
    lr: float = 1e-3
    patience: int = 10
    seed: int = 0

    # Significance testing
    n_perm: int = 10000

    # Worker pool for per-scan stages
    jobs: int = 1

    # Logging
    log_level: str = "INFO"
    logger_verbose: bool = False

    # Tracing
    enable_span_console_export: bool = False
    otlp_endpoint: str | None = None
    tracer_verbose: bool = False

    def __post_init__(self):
        positive = ("tr_s", "physio_rate_hz", "rv_window_s", "window_len",
                    "stride", "band_low_hz", "band_high_hz", "band_order",
                    "epochs", "batch_size", "lr", "patience", "n_perm",
                    "jobs")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"config field '{name}' must be positive, "
                                 f"got {getattr(self, name)!r}")
        if self.physio_column < 0:
            raise ValueError("config field 'physio_column' must be >= 0")
        if self.rv_ddof not in (0, 1):
            raise ValueError("config field 'rv_ddof' must be 0 or 1")
        for name in ("train_fraction", "validation_fraction"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"config field '{name}' must lie in (0, 1), "
                                 f"got {value!r}")
        if self.band_kind not in ("bandpass", "notch"):
            raise ValueError("config field 'band_kind' must be 'bandpass' "
                             f"or 'notch', got {self.band_kind!r}")
        self.log_level = self.log_level.upper()

    @classmethod
    def from_sources(cls, *sources: dict[str, Any] | None) -> "MotionRvConfig":
        r"""Merge config mappings, later sources winning.

        ``None`` values inside a source mean "not given" and do not override
        earlier sources, so argparse namespaces can be passed directly.
        """
        known = {f.name for f in fields(cls)}
        merged: dict[str, Any] = {}
        for source in sources:
            if not source:
                continue
            for key, value in source.items():
                if key not in known:
                    raise ValueError(f"unknown config key '{key}'")
                if value is not None:
                    merged[key] = value
        return cls(**merged)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def band_spec(self) -> "BandSpec":
        from motionrv.filters import BandKind, BandSpec
        return BandSpec(low_hz=self.band_low_hz,
                        high_hz=self.band_high_hz,
                        order=self.band_order,
                        kind=BandKind(self.band_kind))

    def window_spec(self) -> "WindowSpec":
        from motionrv.dataset import WindowSpec
        return WindowSpec(window_len=self.window_len, stride=self.stride)

    def train_config(self) -> "TrainConfig":
        from motionrv.nn.train import TrainConfig
        return TrainConfig(epochs=self.epochs,
                           batch_size=self.batch_size,
                           seed=self.seed,
                           lr=self.lr,
                           patience=self.patience,
                           validation_fraction=self.validation_fraction)
