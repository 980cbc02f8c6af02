"""Semi-supervised Hoeffding adaptive tree (SSHAD).

Dictionary learning on unlabeled measurements, sparse re-encoding of the
labeled stream, and a drift-aware Hoeffding tree evaluated prequentially.
"""

__version__ = "0.1.0"

from .dictionary_learning import (DictLearnConfig, accumulate_stats, bcd_update,  # noqa: E402
                                  init_dictionary, learn_dictionary, load_dictionary,
                                  save_dictionary, transform_labeled)
from .drift import Adwin, Ddm  # noqa: E402
from .evaluation import (PrequentialReport, StreamSpec, gen_stream, kappa,  # noqa: E402
                         kfold_average, prequential_run)
from .ingestion import (DatasetSchema, Instance, NormalizationStats, fit_normalizer,  # noqa: E402
                        inject_bad_data, load_dataset, normalize, sample_labeled)
from .sparse_coding import (Dictionary, OmpConfig, SparseCode, batch_encode,  # noqa: E402
                            omp_encode, reconstruction_error)
from .tree import HadConfig, HoeffdingAdaptiveTree  # noqa: E402
from .pipeline import (RunConfig, compare_runs, run_had_baseline, run_sshad,  # noqa: E402
                       verify_manifest)

__all__ = [
    "Adwin", "DatasetSchema", "Ddm", "DictLearnConfig", "Dictionary", "HadConfig",
    "HoeffdingAdaptiveTree", "Instance", "NormalizationStats", "OmpConfig", "PrequentialReport",
    "RunConfig", "SparseCode", "StreamSpec", "accumulate_stats", "batch_encode", "bcd_update",
    "compare_runs", "fit_normalizer", "gen_stream", "init_dictionary", "inject_bad_data", "kappa",
    "kfold_average", "learn_dictionary", "load_dataset", "load_dictionary", "normalize",
    "omp_encode", "prequential_run", "reconstruction_error", "run_had_baseline", "run_sshad",
    "sample_labeled", "save_dictionary", "transform_labeled", "verify_manifest",
]
