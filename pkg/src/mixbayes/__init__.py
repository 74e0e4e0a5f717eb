"""Bayes estimation for linear inverse problems under Gaussian-mixture priors."""
