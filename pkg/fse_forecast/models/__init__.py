from fse_forecast.models.dataset import DatasetBundle
from fse_forecast.models.fit import (
    FittedModel,
    FseDiagnostics,
    FseFit,
    OrderSelection,
    SesFit,
    StateDesign,
)
from fse_forecast.models.reports import (
    AccuracyReport,
    CaseReport,
    DescriptiveStats,
    ForecasterAccuracy,
    ImprovementRow,
    MetricSummary,
    ReplicationSummary,
    SeedOutcome,
    SeriesRow,
)
from fse_forecast.models.series import (
    DemandSeries,
    EventCalendar,
    EventCombination,
    EventFactor,
)
from fse_forecast.models.states import (
    CombinationStats,
    DusResult,
    FactorEvidence,
    LabeledCombination,
    MergeDecision,
    MergePolicy,
    StateMap,
    StateMember,
    UpliftSample,
    UpliftState,
)
from fse_forecast.models.stats import FactorEffect, RegressionFit, TestResult
from fse_forecast.models.synth import CalendarEvent, GeneratorSpec, SyntheticBundle
