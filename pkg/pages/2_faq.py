import json

import streamlit as st

from utils.config import conf_dir

st.set_page_config(layout="wide", page_title="FAQ", page_icon="🧮")

st.title("❓Frequently Asked Questions")

with open(conf_dir() / "faq.json", "r", encoding="utf-8") as f:
    faqs = json.load(f)

# Render expanders (first one expanded)
for i, item in enumerate(faqs):
    with st.expander(item["q"], expanded=(i == 0)):
        st.markdown(item["a"])

# Special case: LaTeX formula in its own expander
with st.expander("How is channel-level connectivity calculated?"):
    st.markdown("""
Channel-level connectivity is the fraction of α output channels each β filter can reach, given the group counts of both convolutions:
""")
    st.latex(r"""
\textit{CLC} = \frac{\lceil g_\alpha / g_\beta \rceil}{g_\alpha}
""")
