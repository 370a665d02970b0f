import streamlit as st

explorer = st.Page("pages/1_config_explorer.py", title="🧮 Split Configuration Explorer")
faq = st.Page("pages/2_faq.py", title="❓ Frequently Asked Questions")
pg = st.navigation([
    explorer,
    faq,
])
st.set_page_config(page_title="LUT Compiler Dashboard", page_icon="🧮")
pg.run()
