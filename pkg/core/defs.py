from enum import Enum

MAX_CORNER_DIM = 16

TOL_ORDER = 1e-9
TOL_CONTAIN = 1e-6
TOL_DIAG = 1e-9
TOL_SIGN = 1e-6
TOL_C = 1e-10
TOL_TIE = 1e-12
FD_RELATIVE_STEP = 1e-5

DEFAULT_P = 1000.0
DEFAULT_DT = 0.01
DEFAULT_SEGMENT = 0.25


class AsciiCommands(str, Enum):
    COLORIZE_DEFAULT = '\033[0m'
    COLORIZE_WARN = '\033[93m'
    COLORIZE_HIGHLIGHT = '\033[92m'
    COLORIZE_WARNING = '\033[93m'
    COLORIZE_ERROR = '\033[91m'


class IntegrationMethod(str, Enum):
    EULER = "euler"
    RK4 = "rk4"


class FilterStatus(str, Enum):
    PASSED_DESIRED = "passed-desired"
    PROJECTED = "projected"
    BACKUP_FALLBACK = "backup-fallback"
    RAW = "raw"


class ControllerMode(str, Enum):
    DESIRED_ONLY = "desired-only"
    VANILLA_CBF = "vanilla-cbf"
    ASIF = "asif"
    BACKUP_ONLY = "backup-only"


class GradientMethod(str, Enum):
    DIRECT = "direct"
    CHAIN = "chain"


class AssumptionVerdict(str, Enum):
    PROVED = "proved-by-embedding"
    NOT_FALSIFIED = "not-falsified (not a proof)"
    FALSIFIED = "falsified"


class BoundingBoxMode(str, Enum):
    EIGEN = "eigen"
    ELLIPSOID = "ellipsoid"


EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_CONFIG_ERROR = 2
