"""Per-input attack campaigns over the evaluation set."""
