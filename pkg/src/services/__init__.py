# Estimation services for the additive risks model
