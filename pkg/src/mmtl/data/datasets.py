"""Registry of supported datasets: rates, channels, label maps, default windows."""
from __future__ import annotations

from dataclasses import dataclass

from mmtl.errors import ConfigError

STANDARD_GRAVITY = 9.80665


@dataclass(frozen=True)
class DatasetInfo:
    name: str
    sample_rate_hz: float
    channel_names: tuple[str, ...]
    class_names: tuple[str, ...]
    # Indices of (x, y, z) triples that rotate together during augmentation.
    triples: tuple[tuple[int, int, int], ...]
    # Acceleration channels summed for SMA, and the factor taking them to m/s^2.
    sma_channels: tuple[int, ...]
    sma_scale: float
    window: int
    overlap: float
    prewindowed: bool = False

    @property
    def num_channels(self) -> int:
        return len(self.channel_names)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


def _xyz(prefix: str) -> tuple[str, str, str]:
    return (f"{prefix}_x", f"{prefix}_y", f"{prefix}_z")


UCI_HAR = DatasetInfo(
    name="uci-har",
    sample_rate_hz=50.0,
    channel_names=_xyz("body_acc") + _xyz("body_gyro") + _xyz("total_acc"),
    class_names=("walking", "ascending_stairs", "descending_stairs", "sitting", "standing", "lying"),
    triples=((0, 1, 2), (3, 4, 5), (6, 7, 8)),
    sma_channels=(6, 7, 8),
    sma_scale=STANDARD_GRAVITY,
    window=128,
    overlap=0.5,
    prewindowed=True,
)

WISDM = DatasetInfo(
    name="wisdm",
    sample_rate_hz=20.0,
    channel_names=_xyz("acc"),
    class_names=("walking", "jogging", "ascending_stairs", "descending_stairs", "sitting", "standing"),
    triples=((0, 1, 2),),
    sma_channels=(0, 1, 2),
    sma_scale=1.0,
    window=200,
    overlap=0.5,
)

MHEALTH = DatasetInfo(
    name="mhealth",
    sample_rate_hz=50.0,
    channel_names=_xyz("chest_acc") + _xyz("ankle_acc") + _xyz("ankle_gyro"),
    class_names=(
        "standing", "sitting", "lying", "walking", "ascending_stairs", "waist_bends",
        "arm_elevation", "knees_bending", "cycling", "jogging", "running", "jumping",
    ),
    triples=((0, 1, 2), (3, 4, 5), (6, 7, 8)),
    sma_channels=(3, 4, 5),
    sma_scale=1.0,
    window=128,
    overlap=0.5,
)

SYNTHETIC = DatasetInfo(
    name="synthetic",
    sample_rate_hz=50.0,
    channel_names=_xyz("acc"),
    class_names=("slow", "medium", "fast"),
    triples=((0, 1, 2),),
    sma_channels=(0, 1, 2),
    sma_scale=1.0,
    window=64,
    overlap=0.5,
)

DATASETS: dict[str, DatasetInfo] = {d.name: d for d in (UCI_HAR, WISDM, MHEALTH, SYNTHETIC)}


def get_dataset(name: str) -> DatasetInfo:
    try:
        return DATASETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown dataset {name!r}; expected one of {', '.join(sorted(DATASETS))}") from None
