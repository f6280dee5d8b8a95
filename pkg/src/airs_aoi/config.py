"""Scenario configuration and the flat ``key = value`` scenario file format.

All quantities are kept in linear units internally. Keys ending in ``_db`` are
converted with ``10**(x/10)``; keys ending in ``_dbm`` are converted to watts.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class ConfigError(ValueError):
    """Raised for malformed scenario files, unknown keys or invalid values."""


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def dbm_to_watts(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def vec3(values) -> np.ndarray:
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.shape != (3,):
        raise ConfigError(f"expected a 3-vector, got {values!r}")
    if not np.all(np.isfinite(v)):
        raise ConfigError(f"non-finite vector component in {values!r}")
    return v


def near_square_factors(n: int) -> tuple[int, int]:
    """Split ``n`` into ``(a, b)`` with ``a * b == n``, ``a <= b`` and ``a`` maximal."""
    if n < 1:
        raise ConfigError(f"element count must be >= 1, got {n}")
    a = int(math.isqrt(n))
    while n % a:
        a -= 1
    return a, n // a


# The §IV-style default deployment (users as listed for the six-user downlink).
DEFAULT_USERS = (
    (200.0, -100.0, 0.0),
    (150.0, 300.0, 0.0),
    (320.0, -280.0, 0.0),
    (490.0, 20.0, 0.0),
    (50.0, -200.0, 0.0),
    (730.0, 30.0, 0.0),
)
DEFAULT_CARRIER = 2.4e9


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical constants, geometry and per-user parameters of one scenario."""

    m_x: int = 4
    m_z: int = 4
    n_sx: int = 22
    n_sy: int = 25
    wavelength: float = SPEED_OF_LIGHT / DEFAULT_CARRIER
    d_ox: float | None = None  # defaults to wavelength / 2
    d_oz: float | None = None
    d_x: float | None = None  # defaults to wavelength / 10
    d_y: float | None = None
    bs_height: float = 25.0
    altitude: float = 100.0
    rho_o: float = 1e-4
    d_o: float = 1.0
    p_o: float = 1.0
    sigma2: float = dbm_to_watts(-110.0)
    gamma_th: float = db_to_linear(25.0)
    v_max: float = 5.0
    delta: float = 0.1
    n_t: int = 40
    users: tuple = DEFAULT_USERS
    priorities: tuple = (1.0,) * 6
    epsilon: tuple = (0.5,) * 6
    q_init: tuple | None = None  # defaults to [0, 0, altitude]
    fixed_xy: tuple = (0.0, 0.0)
    rng_seed: int = 0
    # optimizer controls
    sca_tol: float = 1e-4
    sca_max_iter: int = 20
    barrier_gap: float = 1e-9
    alpha_min: float = 1e-6

    def __post_init__(self):
        # fill wavelength-dependent defaults, normalise sequences to tuples
        lam = self.wavelength
        for name, frac in (("d_ox", 0.5), ("d_oz", 0.5), ("d_x", 0.1), ("d_y", 0.1)):
            if getattr(self, name) is None:
                object.__setattr__(self, name, lam * frac)
        object.__setattr__(self, "users", tuple(tuple(float(c) for c in u) for u in self.users))
        object.__setattr__(self, "priorities", tuple(float(b) for b in self.priorities))
        object.__setattr__(self, "epsilon", tuple(float(e) for e in self.epsilon))
        object.__setattr__(self, "fixed_xy", tuple(float(c) for c in self.fixed_xy))
        if self.q_init is None:
            object.__setattr__(self, "q_init", (0.0, 0.0, float(self.altitude)))
        else:
            object.__setattr__(self, "q_init", tuple(float(c) for c in self.q_init))
        self.validate()

    # derived quantities -------------------------------------------------
    @property
    def M(self) -> int:
        return self.m_x * self.m_z

    @property
    def N_s(self) -> int:
        return self.n_sx * self.n_sy

    @property
    def K(self) -> int:
        return len(self.users)

    @property
    def bs_position(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.bs_height])

    @property
    def user_positions(self) -> np.ndarray:
        return np.array(self.users, dtype=float).reshape(-1, 3)

    @property
    def q_start(self) -> np.ndarray:
        return np.array(self.q_init, dtype=float)

    @property
    def fixed_position(self) -> np.ndarray:
        return np.array([self.fixed_xy[0], self.fixed_xy[1], self.altitude])

    @property
    def step_radius(self) -> float:
        """Largest horizontal displacement per slot, ``v_max * delta``."""
        return self.v_max * self.delta

    @property
    def snr_constant(self) -> float:
        """rho_o^2 d_o^4 P_o N_s^2 M / sigma^2, the numerator of the closed-form SNR."""
        return self.rho_o**2 * self.d_o**4 * self.p_o * self.N_s**2 * self.M / self.sigma2

    # -------------------------------------------------------------------
    def validate(self) -> None:
        def fail(msg):
            raise ConfigError(msg)

        for name in ("m_x", "m_z", "n_sx", "n_sy", "n_t"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 1:
                fail(f"{name} must be a positive integer")
        for name in ("wavelength", "d_ox", "d_oz", "d_x", "d_y", "rho_o", "d_o",
                     "p_o", "sigma2", "gamma_th", "delta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                fail(f"{name} must be positive and finite, got {v}")
        if self.v_max < 0 or not math.isfinite(self.v_max):
            fail("v_max must be nonnegative")
        if not self.d_x < self.wavelength / 2 or not self.d_y < self.wavelength / 2:
            fail("IRS element spacing must be below half a wavelength")
        if self.K < 1:
            fail("at least one user is required")
        if len(self.priorities) != self.K:
            fail(f"priorities has {len(self.priorities)} entries, expected {self.K}")
        if len(self.epsilon) != self.K:
            fail(f"epsilon has {len(self.epsilon)} entries, expected {self.K}")
        if any(not (0.0 <= e <= 1.0) for e in self.epsilon):
            fail("arrival probabilities must lie in [0, 1]")
        if any(not (b > 0 and math.isfinite(b)) for b in self.priorities):
            fail("priorities must be positive")
        for u in self.users:
            vec3(u)
        q0 = vec3(self.q_init)
        if q0[2] != self.altitude:
            fail(f"q_init altitude {q0[2]} differs from altitude {self.altitude}")
        if not (0 < self.alpha_min < 1):
            fail("alpha_min must lie in (0, 1)")
        if self.sca_max_iter < 1 or self.sca_tol <= 0 or self.barrier_gap <= 0:
            fail("optimizer tolerances must be positive")

    def with_overrides(self, **changes) -> "ScenarioConfig":
        """Return a copy with ``changes`` applied.

        Accepts the pseudo-key ``n_s`` (re-factorised into ``n_sx * n_sy``). When the
        altitude changes and ``q_init`` is not given, the start point follows it.
        """
        changes = dict(changes)
        if "n_s" in changes:
            n_sx, n_sy = near_square_factors(int(changes.pop("n_s")))
            changes.setdefault("n_sx", n_sx)
            changes.setdefault("n_sy", n_sy)
        if "altitude" in changes and "q_init" not in changes:
            x, y, _ = self.q_init
            changes["q_init"] = (x, y, float(changes["altitude"]))
        if "wavelength" in changes:
            # spacings given as wavelength fractions follow the new wavelength
            ratio = changes["wavelength"] / self.wavelength
            for name in ("d_ox", "d_oz", "d_x", "d_y"):
                changes.setdefault(name, getattr(self, name) * ratio)
        bad = set(changes) - {f.name for f in dataclasses.fields(self)}
        if bad:
            raise ConfigError(f"unknown scenario key(s): {', '.join(sorted(bad))}")
        return dataclasses.replace(self, **changes)


# ---------------------------------------------------------------------------
# scenario file format


def _parse_scalar(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None


def _parse_vector(text: str) -> tuple:
    return tuple(_parse_scalar(t) for t in text.split(","))


def _parse_list(text: str) -> tuple:
    return tuple(_parse_scalar(t) for t in text.split(";") if t.strip())


def _parse_vector_list(text: str) -> tuple:
    return tuple(_parse_vector(t) for t in text.split(";") if t.strip())


_INT_KEYS = {"m_x", "m_z", "n_sx", "n_sy", "n_t", "rng_seed", "sca_max_iter", "n_s"}
_FLOAT_KEYS = {"wavelength", "d_ox", "d_oz", "d_x", "d_y", "bs_height", "altitude",
               "rho_o", "d_o", "p_o", "sigma2", "gamma_th", "v_max", "delta",
               "sca_tol", "barrier_gap", "alpha_min"}
_LIST_KEYS = {"priorities", "epsilon"}
_VECTOR_KEYS = {"q_init", "fixed_xy"}
_VECTOR_LIST_KEYS = {"users"}
# keys accepted on input only; mapped to canonical fields
_DB_KEYS = {"rho_o_db": "rho_o", "gamma_th_db": "gamma_th", "sigma2_db": "sigma2"}
_DBM_KEYS = {"sigma2_dbm": "sigma2"}

KNOWN_KEYS = (_INT_KEYS | _FLOAT_KEYS | _LIST_KEYS | _VECTOR_KEYS | _VECTOR_LIST_KEYS
              | set(_DB_KEYS) | set(_DBM_KEYS) | {"carrier_frequency"})


def parse_assignments(pairs) -> dict:
    """Convert raw ``(key, text)`` pairs into typed ``ScenarioConfig`` keyword changes."""
    out = {}
    for key, text in pairs:
        key = key.strip().lower()
        text = text.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown scenario key: {key}")
        if key in _INT_KEYS:
            v = _parse_scalar(text)
            if v != int(v):
                raise ConfigError(f"{key} must be an integer, got {text!r}")
            out[key] = int(v)
        elif key in _FLOAT_KEYS:
            out[key] = _parse_scalar(text)
        elif key in _LIST_KEYS:
            out[key] = _parse_list(text)
        elif key in _VECTOR_KEYS:
            out[key] = _parse_vector(text)
        elif key in _VECTOR_LIST_KEYS:
            out[key] = _parse_vector_list(text)
        elif key in _DB_KEYS:
            out[_DB_KEYS[key]] = db_to_linear(_parse_scalar(text))
        elif key in _DBM_KEYS:
            out[_DBM_KEYS[key]] = dbm_to_watts(_parse_scalar(text))
        elif key == "carrier_frequency":
            out["wavelength"] = SPEED_OF_LIGHT / _parse_scalar(text)
    return out


def parse_scenario_text(text: str) -> dict:
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        pairs.append((key, value))
    return parse_assignments(pairs)


def parse_override(item: str) -> tuple[str, str]:
    if "=" not in item:
        raise ConfigError(f"override must look like key=value, got {item!r}")
    key, value = item.split("=", 1)
    return key.strip(), value.strip()


def build_config(changes: dict, base: ScenarioConfig | None = None) -> ScenarioConfig:
    base = base or ScenarioConfig()
    changes = dict(changes)
    users = changes.get("users")
    if users is not None:
        k = len(users)
        # per-user lists default to neutral values when the user count changes
        if "priorities" not in changes and len(base.priorities) != k:
            changes["priorities"] = (1.0,) * k
        if "epsilon" not in changes and len(base.epsilon) != k:
            changes["epsilon"] = (0.5,) * k
    try:
        return base.with_overrides(**changes)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_scenario(path, overrides=()) -> ScenarioConfig:
    """Read a scenario file and apply ``key=value`` override strings on top of it."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"scenario file not found: {path}")
    changes = parse_scenario_text(path.read_text())
    extra = parse_assignments(parse_override(o) for o in overrides)
    if "altitude" in extra and "q_init" not in extra and "q_init" in changes:
        # the start point always flies at the configured altitude
        x, y, _ = changes["q_init"]
        extra["q_init"] = (x, y, extra["altitude"])
    changes.update(extra)
    return build_config(changes)


def format_scenario(cfg: ScenarioConfig) -> str:
    """Serialise ``cfg`` in the scenario file format (linear units, round-trippable)."""
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if f.name == "users":
            text = "; ".join(",".join(repr(c) for c in u) for u in v)
        elif f.name in _LIST_KEYS:
            text = "; ".join(repr(x) for x in v)
        elif f.name in _VECTOR_KEYS:
            text = ",".join(repr(x) for x in v)
        else:
            text = repr(v)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"
