import io

import altair as alt
import pandas as pd
import requests
import streamlit as st

from model_service.main import post_pareto, post_search
from utils.functions.helper import H
from utils.functions.statefulness import EXPLORER_PREFIX as P

RANKED_COLUMNS = ["tuple_form", "phi_alpha", "phi_beta", "clc", "score", "block_cost", "network_cost", "analytic_cost"]


def explorer_inputs():
    """Render the search inputs; values land in session_state under the explorer_ prefix."""
    c_col, k_col, f_col = st.columns(3)
    with c_col:
        st.number_input("Input channels c", min_value=1, step=1, key=P + "c", help=H("explorer.filter"))
    with k_col:
        st.number_input("Kernel k", min_value=1, step=1, key=P + "k", help=H("explorer.filter"))
    with f_col:
        st.number_input("Filters f", min_value=1, step=1, key=P + "f", help=H("explorer.filter"))

    st.slider("Maximum fan-in φ_max", 2, 20, key=P + "phi_max", help=H("explorer.phi_max"))
    budget_col, threshold_col = st.columns(2)
    with budget_col:
        st.number_input("LUT budget", min_value=1, step=500, key=P + "budget_luts", help=H("explorer.budget"))
    with threshold_col:
        st.number_input("Score threshold", min_value=0.0, step=0.5, format="%.2f",
                        key=P + "score_threshold", help=H("explorer.threshold"))
    st.radio("Kernel orders", ["both", "k0_first", "k0_last"], horizontal=True, key=P + "kernel_orders")
    st.checkbox("Cost the whole MIT-BIH AF network", key=P + "use_architecture", help=H("explorer.architecture"))


def search_payload() -> dict:
    s = st.session_state
    payload = {
        "filters": [{"c": int(s[P + "c"]), "k": int(s[P + "k"]), "f": int(s[P + "f"])}],
        "phi_max": int(s[P + "phi_max"]),
        "kernel_orders": s[P + "kernel_orders"],
        "budget_luts": int(s[P + "budget_luts"]),
        "score_threshold": float(s[P + "score_threshold"]),
    }
    if s[P + "use_architecture"]:
        payload["architecture"] = "mitbih_af"
    return payload


def ranked_frame(result: dict) -> pd.DataFrame:
    df = pd.DataFrame(result["configs"], columns=RANKED_COLUMNS)
    if df.empty:
        return df
    df["tuple_form"] = df["tuple_form"].map(lambda t: "(" + ",".join(str(v) for v in t) + ")")
    return df


def score_chart(df: pd.DataFrame, threshold: float) -> alt.LayerChart:
    points = alt.Chart(df).mark_circle(size=70).encode(
        x=alt.X("analytic_cost:Q", title="Analytic cost (LUTs)"),
        y=alt.Y("score:Q", title="Score"),
        tooltip=["tuple_form", "score", "analytic_cost", "phi_alpha", "phi_beta"],
    )
    rule = alt.Chart(pd.DataFrame({"threshold": [threshold]})).mark_rule(strokeDash=[4, 4], color="gray").encode(
        y="threshold:Q"
    )
    return (points + rule).properties(height=380)


def read_accuracies(upload) -> pd.DataFrame:
    """Uploaded CSV needs tuple_form and accuracy columns; tuple_form written as (a,b,c,d,e,f,g)."""
    df = pd.read_csv(io.BytesIO(upload.getvalue()))
    missing = {"tuple_form", "accuracy"} - set(df.columns)
    if missing:
        raise ValueError(f"accuracy file is missing columns: {', '.join(sorted(missing))}")
    df["tuple_form"] = df["tuple_form"].astype(str).str.replace(" ", "", regex=False)
    return df[["tuple_form", "accuracy"]]


def pareto_chart(merged: pd.DataFrame, front_ids: set[str]) -> alt.Chart:
    merged = merged.assign(front=merged["tuple_form"].isin(front_ids))
    return alt.Chart(merged).mark_point(filled=True, size=80).encode(
        x=alt.X("analytic_cost:Q", title="Analytic cost (LUTs)"),
        y=alt.Y("accuracy:Q", title="Accuracy (%)", scale=alt.Scale(zero=False)),
        color=alt.Color("front:N", title="Pareto optimal"),
        tooltip=["tuple_form", "accuracy", "analytic_cost", "score"],
    ).properties(height=380)


def run_explorer():
    explorer_inputs()

    try:
        with st.spinner("Searching split configurations..."):
            response = post_search(search_payload())
    except requests.HTTPError as exc:
        detail = exc.response.json().get("detail", str(exc)) if exc.response is not None else str(exc)
        st.error(f"Search failed: {detail}")
        return
    except requests.RequestException as exc:
        st.error(f"Model service unreachable: {exc}")
        return

    result = response["results"][0]
    df = ranked_frame(result)
    st.subheader("Ranked Configurations", help=H("explorer.subheader_ranked"))
    st.caption(f"{result['enumerated']} configurations satisfy φ_max; {len(df)} pass the budget and threshold.")
    if df.empty:
        st.warning("No configuration passes the budget and score threshold. Relax either input.")
        return
    st.dataframe(df, use_container_width=True, hide_index=True)
    st.altair_chart(score_chart(df, float(st.session_state[P + "score_threshold"])), use_container_width=True)

    st.subheader("Cost vs. Accuracy", help=H("explorer.subheader_pareto"))
    upload = st.file_uploader("Measured accuracies (CSV)", type=["csv"], help=H("explorer.accuracies"))
    if upload is None:
        return
    try:
        accuracies = read_accuracies(upload)
    except ValueError as exc:
        st.error(str(exc))
        return

    merged = df.merge(accuracies, on="tuple_form", how="inner")
    if merged.empty:
        st.warning("None of the uploaded configurations appear in the ranked list.")
        return
    points = [{"id": r.tuple_form, "cost": float(r.analytic_cost), "accuracy": float(r.accuracy)}
              for r in merged.itertuples()]
    front = post_pareto(points)["front"]
    st.altair_chart(pareto_chart(merged, {p["id"] for p in front}), use_container_width=True)
