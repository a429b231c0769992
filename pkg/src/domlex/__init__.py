"""domlex: domain bilingual lexicon induction toolkit."""

__version__ = "0.1.0"

from .align import AlignmentModel, SelfLearnConfig, map_space, procrustes, self_learn, unsupervised_init
from .anchors import AnchorTable, OccurrenceDump, average_anchor, build_anchor_table, align_anchors
from .codeswitch import (
    CodeSwitchConfig,
    FrequencyTable,
    SwitchReport,
    build_frequency_table,
    classify_word,
    domain_ratio,
    switch_corpus,
)
from .interpolate import InterpolationConfig, interpolated_score, translate, tune_lambda
from .retrieval import (
    EvalReport,
    InducedDictionary,
    RetrievalResult,
    cosine,
    csls,
    evaluate_p_at_1,
    induce,
)
from .spring import (
    SpringNetwork,
    SpringTrainConfig,
    UnifiedSpace,
    contrastive_loss,
    new_spring_network,
    sample_negatives,
    train_spring,
    unify,
)
from .store import (
    BilingualDictionary,
    EmbeddingSpace,
    Vocabulary,
    load_dictionary,
    load_embeddings,
    normalize,
    save_dictionary,
    save_embeddings,
)
