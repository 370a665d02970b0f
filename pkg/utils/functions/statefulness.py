import streamlit as st

EXPLORER_PREFIX = "explorer_"
EXPLORER_BACKUP = "_explorer_backup"


def _explorer_keys() -> list[str]:
    """Session-state keys of the explorer inputs."""
    return [EXPLORER_PREFIX + k for k in
            ("c", "k", "f", "phi_max", "budget_luts", "score_threshold", "kernel_orders", "use_architecture")]


def _init_explorer_state(defaults: dict):
    """
    Seed the explorer inputs from the compiler defaults served by /defaults.
    Keys the user already set are left alone; the dense filter starts at the ECG hidden block (12, 6, 12).
    """
    seeds = {
        "c": 12,
        "k": 6,
        "f": 12,
        "phi_max": defaults.get("phi_max", 12),
        "budget_luts": defaults.get("budget_luts", 8000),
        "score_threshold": float(defaults.get("score_threshold") or 0.0),
        "kernel_orders": "both",
        "use_architecture": True,
    }
    for k, v in seeds.items():
        st.session_state.setdefault(EXPLORER_PREFIX + k, v)


def _backup_keys(keys, backup_name: str = EXPLORER_BACKUP) -> dict:
    """
    Copy the explorer inputs into a plain dict under `backup_name`.

    Streamlit forgets widget keys of a page that is not rendered, so the explorer page calls this
    after drawing its inputs and `_restore_backup` before drawing them again. Keys not in
    session state are skipped.
    """
    backup = {k: st.session_state[k] for k in keys if k in st.session_state}
    st.session_state[backup_name] = backup
    return backup


def _restore_backup(keys, backup_name: str = EXPLORER_BACKUP):
    """Put back explorer inputs that went missing; values still in session state win."""
    backup = st.session_state.get(backup_name, {})
    for k in keys:
        if k not in st.session_state and k in backup:
            st.session_state[k] = backup[k]
