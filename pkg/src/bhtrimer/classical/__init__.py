"""Mean-field (classical) dynamics of the trimer."""
