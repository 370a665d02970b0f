import logging

import requests
import streamlit as st

from model_service.main import fetch_defaults
from utils.functions.explorer import run_explorer
from utils.functions.helper import H
from utils.functions.statefulness import _backup_keys, _explorer_keys, _init_explorer_state, _restore_backup

LOGGER = logging.getLogger(__name__)

st.set_page_config(layout="wide", page_title="Split Configuration Explorer", page_icon="🧮")

st.title("🧮 Split Configuration Explorer", help=H("explorer.title"))

_restore_backup(_explorer_keys())
try:
    defaults = fetch_defaults()
except requests.RequestException as exc:
    LOGGER.warning("could not fetch compiler defaults: %s", exc)
    defaults = {}
_init_explorer_state(defaults)

run_explorer()

_backup_keys(_explorer_keys())
