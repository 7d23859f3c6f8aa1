from ._pcfglab import (
    Grammar,
    PcfgError,
    causal_logprobs,
    fit_zipf,
    generate_corpus,
    masked_distribution,
    ngram_spearman,
    prefix_logprob,
    pseudo_log_likelihood,
    r_squared,
    relative_perplexity,
    run_cli,
    sample,
    sentence_logprob,
    spearman,
)

__all__ = [
    "Grammar",
    "PcfgError",
    "causal_logprobs",
    "fit_zipf",
    "generate_corpus",
    "masked_distribution",
    "ngram_spearman",
    "prefix_logprob",
    "pseudo_log_likelihood",
    "r_squared",
    "relative_perplexity",
    "run_cli",
    "sample",
    "sentence_logprob",
    "spearman",
]
