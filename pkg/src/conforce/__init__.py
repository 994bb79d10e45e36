"""Game-based model building for [0,1]-valued logic.

Conditions (finite sets of strict bounds on quantifier-free sentences)
are extended move by move; a bounded oracle certifies satisfiability,
forcing values bracket what the play can still decide, and enforcer
strategies drive the compiled structure toward target properties.
"""

from .values import Dyadic, Interval, ZERO, ONE, HALF
from .logic import (
    Atomic,
    Const,
    Dist,
    DotPlus,
    Formula,
    Func,
    Half,
    Inf,
    Join,
    Meet,
    Neg,
    PredicateSymbol,
    FunctionSymbol,
    Signature,
    Sup,
    Term,
    Var,
    classify,
    constants_of,
    free_vars,
    rename_constants,
    substitute,
    dotminus_f,
    min_f,
    max_f,
    abs_diff_f,
    scalar_f,
)
from .syntax import ParseError, parse_formula, parse_term, print_formula, print_term
from .structures import (
    FiniteStructure,
    Violation,
    check_ec_at,
    check_embedding,
    dump_structure,
    enumerate_structures,
    evaluate,
    generated_substructure,
    load_structure,
    seminorm_lower_bound,
    structure_from_json,
    structure_to_json,
    validate_structure,
)
from .oracle import (
    Condition,
    ConditionError,
    EMPTY_CONDITION,
    OracleSession,
    PoolBudget,
    SearchBounds,
    Theory,
    Verdict,
)
from .forcing import (
    CompiledApprox,
    ForcingBudget,
    GenericChain,
    NarrowError,
    NarrowResult,
    build_generic,
    companion_value,
    compile_condition,
    compile_generic_model,
    f_value,
    game_value,
    generic_gap_ok,
    narrow,
    strong_value,
    weak_value,
)
from .game import (
    MischiefStrategy,
    Move,
    RandomLegalStrategy,
    StallStrategy,
    TaskStrategy,
    Transcript,
    TransportedStrategy,
    compile_transcript,
    conjoin,
    definitive_check,
    lca_address,
    lift_pairwise,
    play,
    play_multi,
    play_splitting,
    splitting_leaves,
    transcript_from_json,
    transport_transcript,
)
from .enforcers import (
    BackForthResult,
    EcInstance,
    backforth_compare,
    enforce_eatomic,
    enforce_ec,
    enforce_extra_canonical,
    enforce_finite_generic,
    enforce_supjoininf,
    enforce_universal,
    graph_extension_family,
    ledger_done,
    ledger_to_json,
    metric_extension_family,
    service_ledger,
)
from .etypes import (
    ETypeApprox,
    etype_distance,
    etype_of,
    is_isolated_probe,
    maximality_probe,
)
from .packs import builtin_theory, graphs, load_theory, metric, theory_from_json

__version__ = "0.1.0"
