"""Signature-based optimal stopping for trading mean-reverting spreads."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConstructionFailed,
    DataError,
    FitDegenerate,
    InvalidArgument,
    NotMeanReverting,
    SigTradeError,
    TrainingDiverged,
)
from .signature import (  # noqa: F401
    AugmentedPath,
    DualVector,
    Path,
    TruncatedSignature,
    augment,
    chen_concat,
    pair,
    prefix_signatures,
    segment_signature,
    signature,
    tensor_product,
)
from .policy import (  # noqa: F401
    LinearPolicy,
    Normalizer,
    OptimizerConfig,
    RandomizationSource,
    TrainingSet,
    loss,
    loss_gradient,
    randomized_stopping_index,
    smoothed_cdf,
    smoothed_expected_payoff,
    stopping_index,
    train,
)
from .models import (  # noqa: F401
    BootstrapConfig,
    OUParams,
    SpreadSpec,
    block_bootstrap,
    construct_spread,
    fit_ou_mle,
    generate_training_set,
    simulate_ou,
)
from .engine import (  # noqa: F401
    StrategyConfig,
    TradeSchedule,
    TradingCosts,
    entry_payoff,
    exit_payoff,
    run_sequential,
    solve_stopping_problem,
)
from .backtest import (  # noqa: F401
    BaselineConfig,
    PerformanceReport,
    baseline_strategy,
    compare,
    compute_metrics,
    equity_curve,
    load_prices,
)
