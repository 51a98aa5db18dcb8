"""Dynamic-programming regularization for linear dynamic inverse problems."""
