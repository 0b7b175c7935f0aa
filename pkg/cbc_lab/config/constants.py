"""Constants for cbc-lab numerics, grids, experiments and the config schema."""

import math


# Numerical tolerances (overridable per call and through LabConfig)
QUAD_RTOL: float = 1e-8
SIGN_TOL: float = 1e-10
ODE_RTOL: float = 1e-9
ODE_ATOL: float = 1e-14
QUAD_LIMIT: int = 200

# Lower end of the log-substituted pieces; z^{-1-β} stays below 1e300 above it
QUAD_Z_FLOOR: float = 1e-100

# Below this offset the jump integrand of L is replaced by its Taylor term
TAYLOR_CUTOFF: float = 1e-6

# Atoms of the overlap measure match only under an exact shift
ATOM_MATCH_TOL: float = 1e-12

# Geometric grids
GRID_RATIO: float = 2.0 ** 0.25
LIMIT_GRID_MAX_EXPONENT: int = 40
DIVERGENCE_THRESHOLD: float = 1e3
DIVERGENCE_WINDOW: int = 8

# Ψ > 0 search for Grey's condition
PSI_SEARCH_MIN_EXPONENT: int = -10
PSI_SEARCH_MAX_EXPONENT: int = 60
GREY_CUTOFF: float = 1e10

# Flow solver
LOG_COORDINATE_DECADES: float = 3.0
FLOW_NODES: int = 50
VBAR_CUTOFF: float = 1e10

# Coupling inequality / Lyapunov searches
COUPLING_MAX_HALVINGS: int = 20
LYAPUNOV_MAX_EXPONENT: int = 20
LYAPUNOV_GRID_MIN: float = 2.0 ** -8
LYAPUNOV_GRID_MAX: float = 2.0 ** 24
LYAPUNOV_ROWS: int = 10
NONEXPLOSION_FLOOR: float = 1e-12

# Simulator
THINNING_HEADROOM: float = 0.25
RESTART_BUDGET: int = 8
MAX_HALVINGS: int = 20
PATHS_PER_BLOCK: int = 4096

# Lamperti
DEFAULT_EPS_FACTOR: float = 1e-3
DEPLETION_FRACTION: float = 0.9
LEVY_HORIZON_FACTOR: float = 50.0

# QSD estimation
MIN_SURVIVORS: int = 100
MIN_PARTICLES: int = 100
DEFAULT_BINS: int = 50
PILOT_PATHS: int = 1000
MIN_RATE_POINTS: int = 4

# Confidence levels
WILSON_CONFIDENCE: float = 0.95

EULER_GAMMA: float = 0.5772156649015329
LOG2: float = math.log(2.0)

# CLI exit codes
EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INVARIANT = 2
EXIT_NUMERIC = 3
EXIT_TIMEOUT = 124

# Experiment execution
DEFAULT_TIMEOUT = 3600.0
THREADS_ENV_VAR = "CBC_LAB_THREADS"
MANIFEST_NAME = "manifest.json"

EXPERIMENT_KINDS: list[str] = [
    "conditions",
    "flow",
    "simulate",
    "couple",
    "lyapunov",
    "coupling-inequality",
    "lamperti",
    "qsd",
    "rate",
]

STOCHASTIC_KINDS: frozenset[str] = frozenset(
    {"simulate", "couple", "lamperti", "qsd", "rate"}
)

MEASURE_KINDS: list[str] = [
    "zero",
    "truncated_stable",
    "stable",
    "neveu",
    "tempered_stable",
    "atoms",
    "tabulated",
]

COMPETITION_KINDS: list[str] = ["zero", "power", "logistic", "linear"]

GROWTH_KINDS: list[str] = ["log_power", "power"]

MECHANISM_PRESETS: list[str] = ["custom", "feller", "neveu"]

# Flat config schema: dotted key -> (type, default). A default of None means
# the key is optional and has no value unless supplied.
CONFIG_SCHEMA: dict[str, tuple[type, object]] = {
    "experiment": (str, None),
    "seed": (int, None),
    "output": (str, "cbc-lab-out"),
    "threads": (int, 1),
    "mechanism.kind": (str, "custom"),
    "mechanism.b": (float, 0.0),
    "mechanism.c": (float, 0.0),
    "mechanism.mu.kind": (str, "zero"),
    "mechanism.mu.C": (float, 1.0),
    "mechanism.mu.beta": (float, 1.5),
    "mechanism.mu.lambda0": (float, 1.0),
    "mechanism.mu.atoms": (str, None),
    "mechanism.mu.grid": (str, None),
    "mechanism.mu.small_exponent": (float, None),
    "mechanism.mu.tail_exponent": (float, None),
    "competition.kind": (str, "zero"),
    "competition.a": (float, 1.0),
    "competition.p": (float, 2.0),
    "competition.h": (float, 0.0),
    "competition.theta": (float, None),
    "growth.kind": (str, "log_power"),
    "growth.p": (float, 2.0),
    "growth.q": (float, 0.5),
    "params.alpha": (float, None),
    "params.lambda": (float, 1.0),
    "params.t": (float, 1.0),
    "params.t_max": (float, 1.0),
    "params.t_grid": (str, "1,2,4,6"),
    "params.x0": (float, 1.0),
    "params.x1": (float, 2.0),
    "params.x2": (float, 1.0),
    "params.init1": (float, 1.0),
    "params.init2": (float, 5.0),
    "params.dt": (float, 0.01),
    "params.eps": (float, 0.01),
    "params.horizon": (float, 1.0),
    "params.n_paths": (int, 10000),
    "params.particles": (int, 1000),
    "params.bins": (int, None),
    "params.rho": (float, None),
    "params.A": (float, 1.0),
    "params.B": (float, 2.0),
    "params.target_C": (float, 1.0),
    "params.n_max": (int, 5),
    "params.level_eps": (float, None),
    "params.y_grid": (str, "0.1,0.05,0.01"),
    "params.delta": (float, None),
}
