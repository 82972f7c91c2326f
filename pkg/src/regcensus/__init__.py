"""Register-based census toolkit.

Builds a de-identified, integrated census database from raw
administrative registers, enumerates its population under five
conceptual frameworks, and scores the result against a traditional
reference census.
"""

from .errors import ConfigError, DataError, IngestError, RegCensusError
from .records import (
    AGE_BIN_LABELS,
    AGE_BINS,
    CANONICAL_FIELDS,
    MAIN_VARIABLES,
    NA,
    AgeBin,
    FieldDictionary,
    GlobalKey,
    IntegratedDatabase,
    NotAvailable,
    ReferenceCensus,
    Register,
    RegisterRecord,
    bin_age,
    is_present,
    read_register_csv,
    write_register_csv,
)
from .ingest import Composite, Delimited, FixedWidth, SourceSpec, SplitRule, ingest
from .cleanse import dedup_register, standardize_values, validate_values
from .deident import DeidentPolicy, Salt, deidentify, hash_value, load_salt, retrieve
from .integrate import (
    KeySpec,
    ReplacementPolicy,
    integrate,
    relabel_fields,
    validate_key_candidate,
)
from .frameworks import CensusPopulation, FrameworkSpec, enumerate_population, pyramid
from .quality import (
    CategoryDistribution,
    QualityReport,
    chd,
    chd_squared,
    chi2_homogeneity,
    chi2_upper_tail,
    coverage_rate,
    evaluate,
    evaluate_from_counts,
    overcoverage_rate,
    rank_frameworks,
)
from .synth import ScenarioConfig, generate

__version__ = "0.1.0"
