"""DER, WER and cpWER scoring."""
