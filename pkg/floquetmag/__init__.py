#  noqa: D104
