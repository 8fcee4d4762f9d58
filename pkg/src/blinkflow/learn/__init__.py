from .baselines import baseline_fit_predict, knn_predict, fit_linear_svm
from .data import (
    BlockFeatures,
    Dataset,
    LabeledInstance,
    featurize,
    kmeans_split,
    loso_folds,
    make_dataset,
    permute_labels,
)
from .evaluate import EvalConfig, EvalReport, evaluate, format_table
from .mdlstm import (
    MdLstmModel,
    TrainConfig,
    fit_mdlstm,
    init_mdlstm,
    mdlstm_forward,
    mdlstm_grad,
    predict,
    train,
)

__all__ = [
    "baseline_fit_predict",
    "knn_predict",
    "fit_linear_svm",
    "BlockFeatures",
    "Dataset",
    "LabeledInstance",
    "featurize",
    "kmeans_split",
    "loso_folds",
    "make_dataset",
    "permute_labels",
    "EvalConfig",
    "EvalReport",
    "evaluate",
    "format_table",
    "MdLstmModel",
    "TrainConfig",
    "fit_mdlstm",
    "init_mdlstm",
    "mdlstm_forward",
    "mdlstm_grad",
    "predict",
    "train",
]
