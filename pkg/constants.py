# Filenames for the input CSVs (under data/)
SCHEDULE_FILENAME = "schedule.csv"
RESPONSES_FILENAME = "responses.csv"

# Filenames for run outputs
REPORT_FILENAME = "report.json"
ALLOCATION_FILENAME = "allocation.csv"
ILP_FILENAME = "usw.lp"

# Cache directory for synthetic cohorts (parquet)
SYNTH_CACHE_DIRNAME = ".synth_cache"

# Public dataset location
DATA_REPO_URL = "https://github.com/Fair-and-Explainable-Decision-Making/course-allocation-data"

# Random seed for reproducibility
RANDOM_SEED = 42

# Academic statuses, highest priority first
STATUSES = ("PhD", "MS", "Senior", "Junior", "Sophomore", "Freshman")
STATUS_RANK = {s: r for r, s in enumerate(STATUSES)}
GRADUATE_STATUSES = frozenset({"PhD", "MS"})

# Maximum courses per semester allowed by the department
UNDERGRAD_COURSE_CAP = 6
GRAD_COURSE_CAP = 4
COURSE_CAP = {s: GRAD_COURSE_CAP if s in GRADUATE_STATUSES else UNDERGRAD_COURSE_CAP for s in STATUSES}

# Survey scale
MIN_RATING = 1
MAX_RATING = 8

# Department population and effective survey responses per status
POPULATION = {"Freshman": 239, "Sophomore": 327, "Junior": 408, "Senior": 573, "MS": 613, "PhD": 148}
EFFECTIVE_RESPONSES = {"Freshman": 125, "Sophomore": 113, "Junior": 126, "Senior": 117, "MS": 172, "PhD": 47}

# Lowest effective response rate (seniors), used for the reduced instance
MIN_RESPONSE_RATE = 0.2042

# Top-k approval threshold
DEFAULT_K = 10

# Synthetic students
DEFAULT_ELL = 100
PRIOR_NU = 1e-3
PRIOR_MEAN = 0.5
MARGINAL_EPS = 1e-9
EIGENVALUE_FLOOR = 1e-10

# Brute-force oracle guard
MAX_ORACLE_STATES = 10**7

# Default cohort sizes for the runtime sweep
SWEEP_COHORTS = (500, 1000, 2000, 2308)

# Float precision in JSON reports
REPORT_DECIMALS = 6

# Process exit codes
EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_INVARIANT_ERROR = 3
