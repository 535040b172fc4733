# Tests package for the additive risks model estimator
