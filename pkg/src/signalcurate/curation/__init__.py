from .dataset import HEADER, DatasetError, export_dataset, import_dataset
from .loss import (
    CurationBatch,
    DegenerateWeightsError,
    cross_entropy,
    evaluate_curation_loss,
    partition_and_weight,
    unlikelihood,
)
from .pipeline import CurationController, CurationRun, curate_run, curation_report
from .priority import fuse_priority, label_record, normalize, rl_only_priorities, score_sample, threshold_filter
from .prompt import build_prompt, render_answer, render_state, strip_hidden
from .records import NON_DELIBERATED_PRIORITY, PriorityConfig, PromptRecord, Provenance
