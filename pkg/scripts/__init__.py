"""Scripts de verificação rápida do simulador."""
