"""codequal: estimate the functional correctness of generated code without
running its tests, and evaluate such estimators with global/local nDCG.

The toolkit covers the whole workflow: corpus ingestion, ground-truth
labeling through pluggable runners, dual correct/incorrect example indexes,
balanced few-shot retrieval, yes/no-posterior scoring against an
OpenAI-compatible (or fully offline stub) backend, and ranking evaluation
with dev-set tuning of the context size.
"""

from .corpus import (
    CandidateSolution,
    DatasetSplit,
    ProblemSpec,
    TestSuite,
    load_dataset,
    split_train_dev,
    validate_corpus,
)
from .estimators import (
    ALL_METHODS,
    PromptTemplate,
    QualityScore,
    build_prompt,
    score_els,
    score_fs,
    score_tls,
    score_zs,
)
from .evaluation import global_ndcg, local_ndcg, ndcg, sweep_k, tune_k
from .executor import (
    CorrectnessLabel,
    RunnerRegistry,
    SandboxConfig,
    SubprocessRunner,
    label_corpus,
    label_solution,
    pass_rate,
)
from .gateway import (
    BackendConfig,
    Embedding,
    GenerationConfig,
    YesNoPosterior,
    embed,
    generate_solutions,
    yes_no_posterior,
)
from .retrieval import (
    ALPHA_PRESETS,
    BalancedContext,
    ExampleIndex,
    NeighborhoodConfig,
    build_index,
    retrieve_balanced,
    sigma,
)

__version__ = "0.1.0"
