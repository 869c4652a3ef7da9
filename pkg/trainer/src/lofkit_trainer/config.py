"""Training configuration; the defaults are the shared supervised recipe."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from lofkit.errors import ValidationError

MODELS = ("resnet18", "resnet50", "segformer")


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for both classifier and segmenter training.

    `channels` names the input planes; anything beyond plain R,G,B must be
    read from channel-stack exports (see `stacks_dir` on the train
    functions). `pretrained` starts from published backbone weights and
    needs network access; set False for offline runs.
    """

    model: str = "resnet18"
    epochs: int = 60
    batch_size: int = 32
    learning_rate: float = 0.001
    channels: tuple[str, ...] = ("R", "G", "B")
    seed: int = 0
    pretrained: bool = True
    image_size: int = 64

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValidationError(f"unknown model {self.model!r} (use one of {MODELS})")
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValidationError("epochs/batch_size must be >= 1 and learning_rate > 0")
        if not self.channels:
            raise ValidationError("channels must not be empty")
        object.__setattr__(self, "channels", tuple(self.channels))

    def to_json(self) -> dict:
        payload = asdict(self)
        payload["channels"] = list(self.channels)
        return payload

    @classmethod
    def from_json(cls, obj: dict) -> "TrainConfig":
        obj = dict(obj)
        obj["channels"] = tuple(obj.get("channels", ("R", "G", "B")))
        return cls(**obj)
