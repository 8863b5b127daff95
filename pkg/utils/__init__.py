"""Concentration and large-deviation bounds for heavy-tailed i.i.d. sums."""
