"""File helpers for atomic writes and digests."""
