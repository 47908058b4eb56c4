"""
Operations of the tax FAVAR pipeline, one module per stage.

panel      ingestion, transforms, balancing and standardization
factors    principal-component factors and factor-count selection
smoothing  local-linear-trend MLE, HP restriction test
narrative  narrative tax rates and Granger exogeneity tests
var_core   reduced-form VAR and moving-average coefficients
identify   sign-restricted tax-shock identification
analysis   structural responses, bands, FEVD, diagnostics
synthetic  deterministic fixture data
"""
