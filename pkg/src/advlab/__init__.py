"""Adversarial-robustness workbench.

Dense classifiers with analytic input gradients, the classic gradient-sign
and boundary attacks, adversarial training, a behavioral gated-RRAM crossbar
simulator, malware binary-to-image texture features, and a small analytics
stack (min-max scaling, Jacobi PCA, Naive Bayes / logistic regression /
random forest, stratified k-fold evaluation).
"""

from .attacks import AdversarialBatch, AttackParams, AttackSpec, bim, deepfool, evaluate_under_attack, fgsm, mim
from .defense import CrossAttackMatrix, DefenseConfig, adversarial_train, cross_attack_matrix
from .idx import IdxDataset, load_idx, to_batch, write_idx
from .metrics import EvalReport
from .nn import (
    DenseLayer,
    LabeledBatch,
    Network,
    TrainConfig,
    build_network,
    evaluate,
    forward,
    load_model,
    loss_and_input_gradient,
    save_model,
    train,
)
from .rram import CrossbarPair, DeviceParams, crossbar_infer, crossbar_mac, curve_eval, program_weights, sweep

__version__ = "0.1.0"
