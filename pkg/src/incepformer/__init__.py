"""SSVEP decoding with IncepFormerNet."""
