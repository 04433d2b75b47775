"""Per-epoch training records."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any


@dataclass(frozen=True)
class EpochRecord:
    epoch: int                        # 1-based
    train_loss: float
    train_activity_loss: float
    train_resistance_loss: float
    val_loss: float
    val_accuracy: float | None
    val_mae: float | None
    lr: float
    seconds: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def append(self, record: EpochRecord) -> None:
        if self.records and record.epoch <= self.records[-1].epoch:
            raise ValueError(f"epoch {record.epoch} after {self.records[-1].epoch}")
        self.records.append(record)

    @property
    def last_epoch(self) -> int:
        return self.records[-1].epoch if self.records else 0

    @property
    def best(self) -> EpochRecord | None:
        return min(self.records, key=lambda r: r.val_loss, default=None)

    def __len__(self) -> int:
        return len(self.records)

    def to_list(self) -> list[dict[str, Any]]:
        return [r.to_dict() for r in self.records]

    @classmethod
    def from_list(cls, items: list[dict[str, Any]]) -> TrainHistory:
        return cls([EpochRecord(**item) for item in items])
