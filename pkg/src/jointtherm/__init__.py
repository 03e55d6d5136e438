"""Model-free prediction of robot joint motor temperatures from joint torques.

An LSTM feature extractor with a stack of dense layers maps joint-torque
sequences to motor temperatures. A first-order thermal plant supplies
synthetic ground truth, and a two-term Gaussian fit serves as the
per-profile baseline.
"""

__version__ = "0.1.0"
