"""Token time estimation: time heads, timing inference and CTM export."""
