"""Shared constants, error types, RNG streams and run configuration.

Every numerical tolerance used by the geometry layer lives in this module so
that the whole package agrees on what "equal" means.  Randomness is organised
around one master seed: every consumer derives an independent counter-based
stream with :func:`stream`, which makes results reproducible bit-for-bit and
independent of scheduling or chunking.
"""

from dataclasses import dataclass, fields, asdict

import numpy as np

# --- geometry tolerances -------------------------------------------------
HYPERBOLOID_ATOL = 1e-10    # |<x,x>_M + 1| for a valid point
GEODESIC_ATOL = 1e-8        # unit-speed parametrisation error
DISTANCE_ATOL = 1e-9        # metric identities (symmetry, triangle)
CROSS_MODEL_ATOL = 1e-8     # hyperboloid vs Poincare-ball distance

# --- field / linear algebra ----------------------------------------------
JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)   # multiples of sigma2 tried in turn
JITTER_CAP = 1e-8                           # * sigma2; beyond this we fail loudly
COND_RADIUS_FACTOR = 1.5                    # conditioning radius, in units of R0
LATTICE_SPACING_FACTOR = 0.25               # default site spacing, in units of R0

# --- budgets ---------------------------------------------------------------
MAX_PACKING_CENTERS = 4096      # packing truncates here (recorded on the result)
MAX_FIELD_SITES = 20000         # conditional-simulation site budget
MAX_ONESHOT_SITES = 4096        # one-shot Cholesky site budget
LONG_ROUTE_N_CAP = 8            # convolution recursion depth cap


class ConstraintViolation(ValueError):
    """A parameter constraint required by an operation does not hold."""


class BudgetExceeded(RuntimeError):
    """A configured desk-scale budget (sites, centers, depth) was passed."""


class FactorizationError(RuntimeError):
    """Covariance factorisation failed within the allowed jitter cap."""


class KernelUnavailable(ValueError):
    """No usable heat kernel for the requested dimension."""


def stream(seed, *ids):
    """Child generator keyed by ``(seed, *ids)``.

    Uses Philox (counter-based) seeded through ``SeedSequence`` so distinct id
    tuples give independent streams and the mapping is stable across runs,
    platforms and worker counts.  String ids are hashed to stable integers.
    """
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for i in ids:
        if isinstance(i, str):
            h = 2166136261
            for ch in i.encode():
                h = ((h ^ ch) * 16777619) & 0xFFFFFFFF
            key.append(h)
        else:
            key.append(int(i) & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(tuple(key))))


def count(x):
    """Floor a real cap to the integer count actually used (at least 1)."""
    return max(1, int(np.floor(x)))


# --- run configuration -----------------------------------------------------

@dataclass
class RunConfig:
    """Flat, typed configuration for the experiment harness.

    One instance covers every subcommand; each subcommand reads the subset it
    needs.  Validation happens before dispatch and raises
    :class:`ConstraintViolation` with a message naming the violated rule.
    """

    d: int = 2
    sigma2: float = 1.0
    R0: float = 1.0
    kernel_shape: str = "poly3"
    t: float = 1.0
    dt: float = 0.01
    n_paths: int = 1000
    n_reps: int = 32
    delta: float = 0.5
    eta: float = 5e-4
    lam: float = 1e-4
    alpha: float = 0.9
    mu_factor: float = 1.1     # mu = mu_factor * mu0
    K0: float = 2.0
    C_R0_hat: float = 1.0
    beta: float = 1.0 / 3.0
    seed: int = 0
    mode: str = "quenched"
    spacing_factor: float = LATTICE_SPACING_FACTOR
    site_cap: int = 2048
    R_list: str = "5,10,20"
    s_list: str = "0.4,0.2,0.1,0.05"
    eps: float = 0.2
    K: float = 0.4
    delta_tube: float = 1.0
    r_peak: float = 1.0
    peak_height: float = 2.0
    peak_distance: float = 1.5
    zeta: float = 1e-3
    N_hops: int = 4
    out: str = "out"

    def r_values(self):
        return [float(x) for x in str(self.R_list).split(",") if x.strip()]

    def s_values(self):
        return [float(x) for x in str(self.s_list).split(",") if x.strip()]

    def validate(self, need_cluster_scales=False, need_bridge=False):
        if self.d < 2:
            raise ConstraintViolation("dimension d must be >= 2")
        if self.sigma2 <= 0 or self.R0 <= 0:
            raise ConstraintViolation("sigma2 and R0 must be positive")
        if self.dt <= 0:
            raise ConstraintViolation("dt must be positive")
        if not 0.25 < self.beta < 0.5:
            raise ConstraintViolation("beta must lie in (1/4, 1/2)")
        if need_cluster_scales:
            from . import field as _field
            _, eta_delta = _field.cluster_constants(
                self.delta, self.d, self.K0, self.C_R0_hat)
            if not 0 < self.lam < self.eta:
                raise ConstraintViolation(
                    "cluster scales must satisfy lam < eta: the fine route scale "
                    "has to sit strictly below the coarse one "
                    f"(got lam={self.lam}, eta={self.eta})")
            if not self.eta < eta_delta:
                raise ConstraintViolation(
                    "eta must lie below the admissible cluster threshold "
                    f"eta_delta(delta)={eta_delta:.6g} (got eta={self.eta})")
        if need_bridge:
            if not self.delta < self.K:
                raise ConstraintViolation("tube width delta must be < K")
            if not self.eta < min(self.delta / 24.0,
                                  self.delta ** 2 / (2560.0 * self.K)):
                raise ConstraintViolation(
                    "eta too large for the bridge-deviation bound: need "
                    "eta < min(delta/24, delta^2/(2560*K))")
        return self


_BOOL = {"true": True, "false": False, "1": True, "0": False,
         "yes": True, "no": False}


def parse_config(text, path="<config>"):
    """Parse flat ``key = value`` text into a :class:`RunConfig`.

    Unknown keys, malformed lines and type mismatches raise ``ValueError``
    with the offending line number.  A ``subcommand`` key is allowed and
    returned separately (manifests carry it so a run can be replayed).
    """
    spec = {f.name: f.type for f in fields(RunConfig)}
    kwargs = {}
    subcommand = None
    for lineno, raw in enumerate(str(text).splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "subcommand":
            subcommand = value
            continue
        if key == "lambda":   # friendlier alias for the reserved word
            key = "lam"
        if key not in spec:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        default = getattr(RunConfig(), key)
        try:
            if isinstance(default, bool):
                kwargs[key] = _BOOL[value.lower()]
            elif isinstance(default, int):
                kwargs[key] = int(value)
            elif isinstance(default, float):
                kwargs[key] = float(value)
            else:
                kwargs[key] = value
        except (KeyError, ValueError) as exc:
            raise ValueError(
                f"{path}:{lineno}: field {key!r} cannot take value {value!r}") from exc
    return RunConfig(**kwargs), subcommand


def format_config(cfg, subcommand=None):
    """Render a config (plus optional subcommand) back to flat text."""
    lines = []
    if subcommand is not None:
        lines.append(f"subcommand = {subcommand}")
    for key, val in asdict(cfg).items():
        lines.append(f"{key} = {val!r}" if isinstance(val, float) else f"{key} = {val}")
    return "\n".join(lines) + "\n"
