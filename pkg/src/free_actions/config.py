from pathlib import Path
BASE_FOLDER = Path(__file__).parent.parent.parent

FREEPAIR_FORMAT = "FREEPAIR/1"
REPORT_SCHEMA = "free-actions-report/1"

# Window policy
DEFAULT_LEVEL = 3
DEFAULT_MAX_LEVEL = 12
MAX_WINDOW_SIZE = 20000
EXTENSION_CAP = 2
RANDOM_BLOCK = 8
CLOSURE_ROUNDS = 64

# Search and certification
SEARCH_LEVELS = 8
ACL_ROUNDS = 4
CERTIFY_MAX = 3

# Free pair construction
DEFAULT_ROUNDS = 25
DEFAULT_CERT_DEPTH = 8

# Spectra
DEFAULT_RMAX = 6
DEFAULT_TOL = 1e-10
MAX_OPERATOR_DIM = 2_000_000
DEFAULT_SAMPLES = 10_000
EIGSH_MAXITER = 20_000
#
# KESTEN_GENERATORS = 3  (2*sqrt(5) for the free group of rank 3)
KESTEN_GENERATORS = 2

# Separation search: DFS nodes visited per attempt before directed growth
SEARCH_NODES = 20_000
