"""ctxextract: occurrence-dump extraction from pretrained encoders."""

__version__ = "0.1.0"

from .extract import ExtractorConfig, extract
from .finetune import FinetuneConfig, finetune_with_codeswitch
