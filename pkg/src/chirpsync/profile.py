"""Named parameter profiles (the NB-IoT scenario ships with the package)."""

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .units import hz_from_khz, rate_from_khz_per_us, s_from_us


@dataclass(frozen=True)
class LinkDefaults:
    tx_power_dbm: float
    path_loss_db: float
    noise_figure_db: float
    bandwidth_dbhz: float
    noise_density_dbm_hz: float


@dataclass(frozen=True)
class Profile:
    """Scenario constants, stored in SI units."""

    name: str
    version: int
    duration: float
    sub_duration: float
    channel_bandwidth: float
    sigma: float
    delta_f_max: float
    sample_rate: float
    prototype_alpha: float
    composite_alpha: float
    mask_segments: tuple
    link: LinkDefaults

    def mask(self):
        from .spectral import SpectralMask

        return SpectralMask(self.mask_segments)


def available_profiles() -> list[str]:
    root = resources.files(__package__) / "profiles"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


@lru_cache(maxsize=None)
def load_profile(name: str = "nbiot") -> Profile:
    path = resources.files(__package__) / "profiles" / f"{name}.json"
    if not path.is_file():
        raise ValueError(
            f"unknown profile {name!r}; available: {', '.join(available_profiles())}"
        )
    raw = json.loads(path.read_text())
    segments = tuple(
        (
            hz_from_khz(lo),
            float("inf") if hi is None else hz_from_khz(hi),
            float(level),
        )
        for lo, hi, level in raw["mask"]
    )
    return Profile(
        name=raw["name"],
        version=int(raw["version"]),
        duration=s_from_us(raw["duration_us"]),
        sub_duration=s_from_us(raw["sub_duration_us"]),
        channel_bandwidth=hz_from_khz(raw["channel_bandwidth_khz"]),
        sigma=float(raw["sigma"]),
        delta_f_max=hz_from_khz(raw["delta_f_max_khz"]),
        sample_rate=float(raw["sample_rate_hz"]),
        prototype_alpha=rate_from_khz_per_us(raw["prototype_alpha_khz_per_us"]),
        composite_alpha=rate_from_khz_per_us(raw["composite_alpha_khz_per_us"]),
        mask_segments=segments,
        link=LinkDefaults(**raw["link"]),
    )
