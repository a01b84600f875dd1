"""Golden interpreter, DUT model and trace logs."""
