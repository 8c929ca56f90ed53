"""Knowledge-guided greedy equivalence search (KGS) for causal structure learning."""
from .errors import KGSError
from .graph import (
    Cpdag,
    Dag,
    Pdag,
    apply_meek_rules,
    dag_to_cpdag,
    has_semi_directed_path,
    is_acyclic,
    na_yx,
    pdag_to_dag,
    topological_order,
)
from .knowledge import (
    EdgeConstraint,
    KnowledgeMatrix,
    build_knowledge,
    count_consistent_dags,
    delete_allowed,
    initial_cpdag,
    insert_allowed,
    sample_knowledge,
)
from .metrics import confusion, correction_analysis, evaluate, fdr, shd, tpr
from .scoring import Dataset, cpdag_score, graph_score, local_score, read_csv
from .search import SearchConfig, RunStats, run_ges, run_kgs
from .synth import SemConfig, assign_weights, random_dag, sample_data, simulate

__version__ = "0.1.0"
