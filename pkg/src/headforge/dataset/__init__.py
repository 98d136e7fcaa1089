"""Dataset assembly: records, manifests, ablation plans, splits, audits."""
from .build import LeakageReport, build_manifest, verify_leakage
from .plan import (AblationPlan, SourceClip, TEXTURE_COUNT_CONDITIONS,
                   VIEW_CONDITIONS, VIEW_NAMES, plan_jobs)
from .records import (AGE_BUCKETS, ClipRecord, DatasetError, Manifest,
                      ORIGIN_REAL, ORIGIN_SYNTHETIC, SPLITS, STRATA_KEYS,
                      age_bucket, attach_strata, read_manifest, read_records,
                      read_strata_table, write_manifest, write_records)
from .split import SplitResult, stratified_split

__all__ = [
    "AGE_BUCKETS",
    "AblationPlan",
    "ClipRecord",
    "DatasetError",
    "LeakageReport",
    "Manifest",
    "ORIGIN_REAL",
    "ORIGIN_SYNTHETIC",
    "SPLITS",
    "STRATA_KEYS",
    "SourceClip",
    "SplitResult",
    "TEXTURE_COUNT_CONDITIONS",
    "VIEW_CONDITIONS",
    "VIEW_NAMES",
    "age_bucket",
    "attach_strata",
    "build_manifest",
    "plan_jobs",
    "read_manifest",
    "read_records",
    "read_strata_table",
    "stratified_split",
    "verify_leakage",
    "write_manifest",
    "write_records",
]
