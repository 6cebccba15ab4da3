"""Interpretable 28-day post-ICU-discharge mortality risk toolkit."""

from .cohort import (
    CATEGORY_PROBS,
    POPULATION_STATS,
    CohortTable,
    FeatureSchema,
    FeatureSpec,
    PatientRecord,
    default_schema,
    load_cohort,
    save_cohort,
)
from .generator import DEFAULT_SIGNAL, GeneratorConfig, generate_synthetic_cohort
from .preprocess import (
    BmiRegression,
    CleanReport,
    ColumnMeta,
    FeatureMatrix,
    OutlierReport,
    PUBLISHED_BMI_REGRESSION,
    StandardizerState,
    apply_standardizer,
    clean_cohort,
    compute_egfr,
    encode,
    fit_bmi_regression,
    fit_standardizer,
    impute_heights,
    remove_outliers,
    train_test_split,
)
from .resample import SmoteConfig, SmoteResult, smote_nc

__version__ = "0.1.0"
