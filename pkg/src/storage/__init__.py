"""Binary artifact containers and their typed load/save helpers."""
