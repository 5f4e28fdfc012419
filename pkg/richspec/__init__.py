__version__ = '0.1.0'

from .errors import ConfigError, NumericalError, RichspecError, ValidationError
from .spectra import (BandGrid, Dataset, RichnessPlot, SpectralSample,
                      assemble_dataset, concat_datasets,
                      richness_class_spectra, split_by_region,
                      validate_dataset)
from .preprocess import (BandMask, SrfSet, apply_band_mask, gaussian_resample,
                         load_default_srf, make_bin_srf, mean_normalize,
                         preprocess_dataset, simulate_dataset,
                         simulate_multispectral)
from .extraction import (ComponentModel, component_scores, fit_cca,
                         fit_extractor, fit_pca, fit_pls, transform,
                         variance_table)
from .kernel import KernelConfig, build_gram, kernel_eval
from .regression import (GprModel, KrrModel, fit_gpr, fit_krr,
                         log_marginal_likelihood, predict)
from .forest import RfrModel, fit_rfr
from .evaluation import (CVConfig, CVReport, PipelineSpec, compare_pipelines,
                         fit_pipeline, partition_plan, pearson_r,
                         pooled_region_eval, predict_pipeline, rmse,
                         two_fold_cv)
from .synthetic import generate_synthetic_dataset
from .selection import (GridSpec, SelectionResult, grid_search_kernel,
                        select_components)
from .importance import (ImportanceProfile, band_importance,
                         importance_report, partial_correlation)
from .io import (load_model, load_plots_csv, load_spectra_csv, load_srf_csv,
                 save_model)
