"""Level-of-Fouling rank scale and the coverage-threshold decision tree.

The LoF scale rates fouling severity on an ordinal 0-5 scale: 0 is a clean
surface, 1 is a slime-only film, and 2-5 are driven by the percent of hull
area covered by macrofouling.  All threshold intervals are half-open
``(lo, hi]`` so the rank chain is total over [0, 100].
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError

MIN_RANK = 0
MAX_RANK = 5
RANKS = tuple(range(MIN_RANK, MAX_RANK + 1))

# slime + macro may exceed 100 by at most this much (float dust from division)
COVERAGE_SUM_TOLERANCE = 1e-9


def validate_rank(value: int) -> int:
    """Check that `value` is a valid LoF rank and return it."""
    if not isinstance(value, int) or isinstance(value, bool) or not MIN_RANK <= value <= MAX_RANK:
        raise ValidationError(f"lof rank must be an integer in 0..5, got {value!r}")
    return value


@dataclass(frozen=True)
class ThresholdConfig:
    """Interval bounds for the macrofouling branch of the decision tree.

    Ranks map to half-open macrofouling-coverage intervals:
    rank 2 covers ``(macro_presence_epsilon, bound2]``, rank 3 ``(bound2,
    bound3]``, rank 4 ``(bound3, bound4]``, rank 5 ``(bound4, 100]``.
    Macrofouling at or below the epsilon is treated as absent, which keeps
    single-pixel segmentation noise from flipping rank 1 into rank 2.
    """

    macro_presence_epsilon: float = 0.1
    bound2: float = 5.0
    bound3: float = 16.0
    bound4: float = 40.0


#: Default bounds: sparse <5%, moderate 5-16%, extensive 16-40%, heavy >40%.
FIGURE1_DEFAULT = ThresholdConfig()

#: Variant interval set used by the guideline prompt (2: 1-5, 3: 6-15,
#: 4: 16-40, 5: 41-100), expressed in the same half-open convention.
APPENDIX_PROMPT = ThresholdConfig(
    macro_presence_epsilon=1.0, bound2=5.0, bound3=15.0, bound4=40.0
)

PRESETS: dict[str, ThresholdConfig] = {
    "figure1-default": FIGURE1_DEFAULT,
    "appendix-prompt": APPENDIX_PROMPT,
}

_CONFIG_FIELDS = ("macro_presence_epsilon", "bound2", "bound3", "bound4")


def threshold_violations(cfg: ThresholdConfig) -> list[str]:
    """Return every constraint violated by `cfg` (empty list when valid)."""
    violations = []
    if cfg.macro_presence_epsilon < 0:
        violations.append("macro_presence_epsilon not >= 0")
    if not cfg.macro_presence_epsilon < cfg.bound2:
        violations.append("macro_presence_epsilon not < bound2")
    if not cfg.bound2 < cfg.bound3:
        violations.append("bound2 not < bound3")
    if not cfg.bound3 < cfg.bound4:
        violations.append("bound3 not < bound4")
    for name in ("bound2", "bound3", "bound4"):
        value = getattr(cfg, name)
        if not 0 < value < 100:
            violations.append(f"{name} not in (0, 100)")
    return violations


def validate_thresholds(cfg: ThresholdConfig) -> ThresholdConfig:
    """Return `cfg` unchanged when valid, else raise listing all violations."""
    violations = threshold_violations(cfg)
    if violations:
        raise ValidationError("invalid threshold config: " + "; ".join(violations))
    return cfg


def get_preset(name: str) -> ThresholdConfig:
    try:
        return PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(PRESETS))
        raise ValidationError(f"unknown threshold preset {name!r} (known: {known})") from None


_CONFIG_LINE = re.compile(r"^\s*([A-Za-z0-9_]+)\s*=\s*(\S+)\s*$")


def load_threshold_config(path: str | Path) -> ThresholdConfig:
    """Load a ThresholdConfig from a key=value text file.

    Unset keys keep their defaults; `#` starts a comment. The loaded config
    is validated before being returned.
    """
    values: dict[str, float] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        match = _CONFIG_LINE.match(line)
        if match is None:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = match.groups()
        if key not in _CONFIG_FIELDS:
            raise ValidationError(
                f"{path}:{lineno}: unknown key {key!r} (known: {', '.join(_CONFIG_FIELDS)})"
            )
        try:
            values[key] = float(value)
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: {key} is not a number: {value!r}") from None
    return validate_thresholds(ThresholdConfig(**values))


@dataclass(frozen=True)
class FoulingObservation:
    """Percent of hull area covered by slime and by macrofouling."""

    slime_pct: float
    macro_pct: float

    @classmethod
    def from_coverage(cls, report) -> "FoulingObservation":
        """Build an observation from any object exposing slime_pct/macro_pct."""
        return cls(slime_pct=report.slime_pct, macro_pct=report.macro_pct)


def validate_observation(obs: FoulingObservation) -> FoulingObservation:
    for field in ("slime_pct", "macro_pct"):
        value = getattr(obs, field)
        if not 0.0 <= value <= 100.0:
            raise ValidationError(f"{field} out of range [0, 100]: {value!r}")
    if obs.slime_pct + obs.macro_pct > 100.0 + COVERAGE_SUM_TOLERANCE:
        raise ValidationError(
            f"slime_pct + macro_pct exceeds 100: {obs.slime_pct!r} + {obs.macro_pct!r}"
        )
    return obs


def classify_lof(obs: FoulingObservation, cfg: ThresholdConfig = FIGURE1_DEFAULT) -> int:
    """Map a fouling observation to its LoF rank.

    Macrofouling at or below the presence epsilon routes to the slime
    branch (rank 0 when no slime, rank 1 otherwise); above it, the macro
    percentage falls through the half-open interval chain to ranks 2-5.
    """
    validate_observation(obs)
    validate_thresholds(cfg)
    if obs.macro_pct <= cfg.macro_presence_epsilon:
        return 1 if obs.slime_pct > 0 else 0
    if obs.macro_pct <= cfg.bound2:
        return 2
    if obs.macro_pct <= cfg.bound3:
        return 3
    if obs.macro_pct <= cfg.bound4:
        return 4
    return 5
