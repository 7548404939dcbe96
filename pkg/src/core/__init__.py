"""Domain types and encodings."""
