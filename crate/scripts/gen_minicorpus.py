#!/usr/bin/env python3
"""Writes the bundled mini-corpus: papers, answer key, gold annotations and
two external datasets. Mock fixtures are recorded from the answer key with
`compass fixtures record`."""

import csv
import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "crates" / "core" / "fixtures" / "minicorpus"

PB_MOLAR_MASS = 207.2
DPM_PER_BQ = 60.0
SEAWATER_DENSITY = 1025.0


def ng_per_kg_to_pmol_per_kg(v):
    return v * 1000.0 / PB_MOLAR_MASS


def dpm_per_100kg_to_mbq_per_m3(v):
    return v / DPM_PER_BQ / 100.0 * 1000.0 * SEAWATER_DENSITY


def load_mask():
    lines = (ROOT / "crates" / "core" / "data" / "ocean_mask_1deg.txt").read_text().splitlines()
    return [row.strip() for row in lines[1:] if row.strip()]


MASK = load_mask()


def is_ocean(lat, lon):
    import math
    row = min(max(int(math.floor(90.0 - lat)), 0), 179)
    col = int(math.floor(lon + 180.0)) % 360
    return MASK[row][col] == "1"


def dms(value, pos, neg):
    hemi = pos if value >= 0 else neg
    v = abs(value)
    deg = int(v)
    minutes = round((v - deg) * 60.0, 1)
    if minutes == int(minutes):
        return f"{deg}°{int(minutes)}'{hemi}"
    return f"{deg}°{minutes}'{hemi}"


papers = []
answers = {}
gold = {"paper_labels": {}, "table_labels": {}, "gold_records": []}


def gold_record(paper, table, row, col, header, mtype, value, unit, lat, lon, depth, phase="unknown", date=None):
    assert is_ocean(lat, lon), (paper["paper_id"], table["table_id"], row, lat, lon)
    gold["gold_records"].append({
        "record_id": f"{paper['paper_id']}/{table['table_id']}/r{row:03}/c{col}",
        "measurement_type": mtype,
        "value": value,
        "unit": unit,
        "latitude": lat,
        "longitude": lon,
        "depth_m": depth,
        "phase": phase,
        "sample_date": date,
        "provenance": [{
            "source_kind": "extracted",
            "paper_id": paper["paper_id"],
            "doi": paper.get("doi"),
            "table_id": table["table_id"],
            "row_index": row,
            "column_header": header,
            "source_uri": f"file://{paper['paper_id']}.json",
        }],
        "flags": [],
    })


def label(tag, text, rationale):
    answers[tag] = json.dumps({"label": text, "rationale": rationale})


def add_paper(paper, category, table_labels):
    papers.append(paper)
    gold["paper_labels"][paper["paper_id"]] = category
    label(f"classify_paper|{paper['paper_id']}", category, "matches the category definition")
    for t in paper.get("tables", []):
        tl = table_labels.get(t["table_id"], "Non-target")
        gold["table_labels"][f"{paper['paper_id']}/{t['table_id']}"] = tl
        if category in TARGET_PAPERS and t.get("rows"):
            label(f"classify_table|{paper['paper_id']}/{t['table_id']}", tl, "column content")


TARGET_PAPERS = {"Marine Pb conc.", "Marine 210Pb", "Marine Pb isotopes ratios"}


# P01: dissolved Pb in the subtropical North Atlantic.
p1_rows = [
    ("BATS-1", 31.67, 64.17, 15, "48.2"),
    ("BATS-1", 31.67, 64.17, 200, "31.5"),
    ("BATS-1", 31.67, 64.17, 1000, "18.9 ± 0.4"),
    ("BATS-1", 31.67, 64.17, 3000, "<0.5"),
    ("ST-7", 35.20, 40.50, 25, "44.1"),
    ("ST-7", 35.20, 40.50, 500, "27.3a"),
    ("ST-9", 38.75, 28.40, 50, "39.6"),
    ("ST-9", 38.75, 28.40, 2000, "12.4"),
]
p1_t1 = {
    "table_id": "T1",
    "caption": "Dissolved Pb concentrations at three stations.",
    "headers": [["Station", "Latitude (°N)", "Longitude (°W)", "Depth (m)", "dPb (pmol/kg)", "Salinity"]],
    "rows": [[s, f"{la:.2f}", f"{lo:.2f}", str(d), v, "36.6"] for s, la, lo, d, v in p1_rows],
    "footnotes": ["a Value from a replicate bottle.", "Detection limit 0.5 pmol/kg."],
}
p1_t2_rows = [(5, 61.0), (150, 42.5), (800, 20.2), (2500, 9.6)]
p1_t2 = {
    "table_id": "T2",
    "caption": "Total dissolvable Pb at the California margin station.",
    "headers": [["Sampling depth below sea surface (m)", "Pb (ng/kg)"]],
    "rows": [[str(d), f"{v}"] for d, v in p1_t2_rows],
    "footnotes": ["Samples collected at 36°30'N, 123°15.6'W."],
}
p1_t3 = {
    "table_id": "T3",
    "caption": "Macronutrients at station BATS-1.",
    "headers": [["Depth (m)", "Nitrate (µmol/kg)", "Phosphate (µmol/kg)"]],
    "rows": [["15", "0.1", "0.02"], ["200", "2.4", "0.15"], ["1000", "20.1", "1.3"]],
}
p1 = {
    "paper_id": "P01",
    "doi": "10.5555/minicorpus.p01",
    "title": "Dissolved lead in the subtropical North Atlantic and the California margin",
    "abstract": "We report dissolved Pb concentrations in seawater profiles from the subtropical North Atlantic and total dissolvable Pb off California.",
    "sections": [{"heading": "Methods", "text": "Seawater was filtered through 0.2 µm cartridges and Pb was measured by isotope dilution ICP-MS."}],
    "tables": [p1_t1, p1_t2, p1_t3],
}
add_paper(p1, "Marine Pb conc.", {"T1": "Target Pb conc.", "T2": "Target Pb conc."})
for i, (s, la, lo, d, v) in enumerate(p1_rows):
    if v.startswith("<"):
        continue
    num = float(v.split("±")[0].rstrip("a").strip())
    gold_record(p1, p1_t1, i, 4, "dPb (pmol/kg)", "PbConc", num, "pmol/kg", la, -lo, float(d), "dissolved")
for i, (d, v) in enumerate(p1_t2_rows):
    gold_record(p1, p1_t2, i, 1, "Pb (ng/kg)", "PbConc", ng_per_kg_to_pmol_per_kg(v), "pmol/kg", 36.5, -123.26, float(d), "total")
answers["normalize_header|Sampling depth below sea surface (m)"] = json.dumps({"field": "depth_m", "measurement_type": None})
answers["extract_table|P01/T1"] = json.dumps({"columns": [{"column": 4, "measurement_type": "PbConc", "unit": "pmol/kg", "phase": "dissolved"}]})
answers["extract_table|P01/T2"] = json.dumps({"columns": [{"column": 1, "measurement_type": "PbConc", "unit": "ng/kg", "phase": "total"}]})

# P02: 210Pb activities in the South Pacific, positions in DMS.
p2_rows = [
    ("SP-1", -12.5, -152.75, 10, "2013-10-02", 14.2),
    ("SP-1", -12.5, -152.75, 100, "2013-10-02", 16.8),
    ("SP-1", -12.5, -152.75, 500, "2013-10-02", 11.3),
    ("SP-1", -12.5, -152.75, 1500, "2013-10-02", 8.7),
    ("SP-4", -20.25, -140.1, 10, "2013-10-09", 15.9),
    ("SP-4", -20.25, -140.1, 250, "2013-10-09", 13.1),
    ("SP-4", -20.25, -140.1, 1000, "2013-10-09", 9.4),
    ("SP-4", -20.25, -140.1, 3000, "2013-10-09", 6.2),
]
p2_t1 = {
    "table_id": "T1",
    "caption": "Total 210Pb activity in unfiltered seawater.",
    "headers": [["Station", "Latitude", "Longitude", "Depth (m)", "Date", "210Pb (dpm/100 kg)"]],
    "rows": [[s, dms(la, "N", "S"), dms(lo, "E", "W"), str(d), dt, f"{v}"] for s, la, lo, d, dt, v in p2_rows],
}
p2_t2 = {
    "table_id": "T2",
    "caption": "Hydrography at the sampling stations.",
    "headers": [["Station", "Temperature (°C)", "Salinity", "Oxygen (µmol/kg)"]],
    "rows": [["SP-1", "27.1", "35.9", "205"], ["SP-4", "25.4", "36.1", "211"]],
}
p2 = {
    "paper_id": "P02",
    "doi": "10.5555/minicorpus.p02",
    "title": "Water column 210Pb in the oligotrophic South Pacific",
    "abstract": "Profiles of 210Pb activity reveal scavenging rates in the South Pacific gyre.",
    "sections": [{"heading": "Results", "text": "Surface 210Pb activities exceed those at depth at both stations."}],
    "tables": [p2_t1, p2_t2],
}
add_paper(p2, "Marine 210Pb", {"T1": "Target 210Pb"})
for i, (s, la, lo, d, dt, v) in enumerate(p2_rows):
    gold_record(p2, p2_t1, i, 5, "210Pb (dpm/100 kg)", "Pb210Conc", dpm_per_100kg_to_mbq_per_m3(v), "mBq/m3", la, lo, float(d), "total", dt)
answers["extract_table|P02/T1"] = json.dumps({"columns": [{"column": 5, "measurement_type": "Pb210Conc", "unit": "dpm/100kg", "phase": "total"}]})

# P03: Pb isotope ratios in the southern Indian Ocean.
p3_rows = [
    ("IO-2", 22.40, 78.10, 20, 1.1802, 2.0731, 18.412),
    ("IO-2", 22.40, 78.10, 300, 1.1845, 2.0702, 18.486),
    ("IO-2", 22.40, 78.10, 1200, 1.1891, 2.0655, 18.553),
    ("IO-5", 27.95, 84.60, 20, 1.1788, 2.0744, 18.398),
    ("IO-5", 27.95, 84.60, 600, 1.1863, 2.0689, 18.512),
    ("IO-5", 27.95, 84.60, 2000, 1.1910, 2.0630, 18.589),
    ("IO-5", 27.95, 84.60, 3500, 1.1924, 2.0611, 18.611),
]
p3_t1 = {
    "table_id": "T1",
    "caption": "Dissolved Pb isotope compositions.",
    "headers": [["Station", "Lat (°S)", "Lon (°E)", "Depth (m)", "206Pb/207Pb", "2SE", "208Pb/206Pb", "206Pb/204Pb"]],
    "rows": [[s, f"{la:.2f}", f"{lo:.2f}", str(d), f"{a:.4f}", "0.0004", f"{b:.4f}", f"{c:.3f}"] for s, la, lo, d, a, b, c in p3_rows],
}
p3 = {
    "paper_id": "P03",
    "doi": "10.5555/minicorpus.p03",
    "title": "Lead isotopes trace anthropogenic inputs to the southern Indian Ocean",
    "abstract": "Dissolved Pb isotope ratios show a mixture of natural and anthropogenic lead.",
    "sections": [{"heading": "Sampling", "text": "Two stations were occupied in the southern subtropical gyre."}],
    "tables": [p3_t1],
}
add_paper(p3, "Marine Pb isotopes ratios", {"T1": "Target Pb isotope ratios"})
for i, (s, la, lo, d, a, b, c) in enumerate(p3_rows):
    for col, header, mtype, v in [(4, "206Pb/207Pb", "R206_207", a), (6, "208Pb/206Pb", "R208_206", b), (7, "206Pb/204Pb", "R206_204", c)]:
        gold_record(p3, p3_t1, i, col, header, mtype, v, "dimensionless", -la, lo, float(d), "dissolved")
answers["extract_table|P03/T1"] = json.dumps({"columns": [
    {"column": 4, "measurement_type": "R206_207", "unit": "ratio", "phase": "dissolved"},
    {"column": 6, "measurement_type": "R208_206", "unit": "ratio", "phase": "dissolved"},
    {"column": 7, "measurement_type": "R206_204", "unit": "ratio", "phase": "dissolved"},
]})

# Distractors, one per remaining category and two extra.
distractors = [
    ("P04", "Atmospheric Pb", "Aerosol lead over the western Pacific",
     "Atmospheric Pb in aerosols collected on a research cruise declined after leaded gasoline was phased out.",
     [{"table_id": "T1", "caption": "Aerosol Pb.", "headers": [["Date", "Pb (ng/m3)"]], "rows": [["2012-05-01", "3.1"]]}]),
    ("P05", "Terrestrial Pb", "Lead in floodplain soils of a mining district",
     "Soil Pb concentrations and isotopes identify historic smelter emissions.",
     [{"table_id": "T1", "caption": "Soil Pb.", "headers": [["Site", "Pb (mg/kg)"]], "rows": [["S1", "412"]]}]),
    ("P06", "Analytical Pb", "A low-blank method for Pb isotope analysis by MC-ICP-MS",
     "We describe a column chemistry that lowers procedural Pb blanks to 5 pg.", []),
    ("P07", "Irrelevant \"Pb\"", "Design choices that lead to faster database joins",
     "Careful indexing can lead to order-of-magnitude speedups on PB-scale tables.", []),
    ("P08", "Other marine elements", "Dissolved iron and manganese in the Southern Ocean",
     "Dissolved Fe and Mn were measured; Pb was not determined in this study.",
     [{"table_id": "T1", "caption": "Dissolved Fe.", "headers": [["Depth (m)", "dFe (nmol/kg)"]], "rows": [["20", "0.12"]]}]),
    ("P09", "Marine Pb (non-target)", "Lead in coastal marine sediments of the Baltic Sea",
     "Sediment core Pb records the history of industrial emissions.", []),
    ("P10", "Unrelated topics", "Leadership styles in hospital nursing teams",
     "Team lead roles were surveyed across twelve wards.", []),
    ("P11", "Marine Pb (non-target)", "Pb in coral skeletons of the Red Sea",
     "Coral Pb/Ca ratios trace past seawater lead.", []),
    ("P12", "Other marine elements", "Cadmium and zinc cycling in the subarctic Pacific",
     "Cd and Zn distributions are compared with published Pb data.", []),
]
for pid, category, title, abstract, tables in distractors:
    add_paper({"paper_id": pid, "title": title, "abstract": abstract, "sections": [], "tables": tables}, category, {})


def write_externals():
    ext = OUT / "external"
    ext.mkdir(parents=True, exist_ok=True)
    # Structured: five records that repeat P01/T1 values plus three new ones.
    overlap = [g for g in gold["gold_records"] if g["record_id"].startswith("P01/T1/")][:5]
    rows = [(g["latitude"], g["longitude"], g["depth_m"], g["value"]) for g in overlap]
    rows += [(10.0, -30.0, 100.0, 21.7), (10.0, -30.0, 1000.0, 15.3), (45.0, -20.0, 50.0, 33.8)]
    with open(ext / "structured.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["Latitude", "Longitude", "Depth", "Pb_D [pmol/kg]"])
        for la, lo, d, v in rows:
            assert is_ocean(la, lo)
            w.writerow([repr(la), repr(lo), repr(d), repr(v)])
    (ext / "structured.json").write_text(json.dumps({
        "dataset_id": "idp_subset",
        "kind": "structured",
        "citation": "Intermediate data product subset",
        "csv": "structured.csv",
        "columns": {"Latitude": "latitude", "Longitude": "longitude", "Depth": "depth_m"},
        "value_columns": {"Pb_D [pmol/kg]": {"measurement_type": "PbConc", "unit": "pmol/kg", "phase": "dissolved"}},
    }, indent=2) + "\n")
    # Scattered: long form, no overlap.
    with open(ext / "scattered.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["lat", "lon", "depth", "type", "value", "unit"])
        w.writerow(["-40.5", "10.25", "30", "PbConc", "12.5", "ng/kg"])
        w.writerow(["-40.5", "10.25", "30", "R206_207", "1.1650", "ratio"])
    (ext / "scattered.json").write_text(json.dumps({
        "dataset_id": "supplement_s1",
        "kind": "scattered",
        "citation": "Supplementary table S1",
        "csv": "scattered.csv",
        "columns": {"lat": "latitude", "lon": "longitude", "depth": "depth_m", "type": "measurement_type", "value": "value", "unit": "unit"},
    }, indent=2) + "\n")


def main():
    (OUT / "papers").mkdir(parents=True, exist_ok=True)
    for old in (OUT / "papers").glob("*.json"):
        old.unlink()
    for p in papers:
        (OUT / "papers" / f"{p['paper_id']}.json").write_text(json.dumps(p, indent=2, ensure_ascii=False) + "\n")
    (OUT / "answers.json").write_text(json.dumps(dict(sorted(answers.items())), indent=2, ensure_ascii=False) + "\n")
    (OUT / "gold.json").write_text(json.dumps(gold, indent=2, ensure_ascii=False) + "\n")
    (OUT / "run.toml").write_text(
        'corpus_path = "papers"\noutput_dir = "out"\n\n[backend]\nkind = "mock"\nfixtures = "fixtures.json"\n'
    )
    (OUT / "fused.toml").write_text(
        'corpus_path = "papers"\noutput_dir = "out-fused"\nexternal = ["external/structured.json", "external/scattered.json"]\n\n'
        '[backend]\nkind = "mock"\nfixtures = "fixtures.json"\n'
    )
    write_externals()
    n = len(gold["gold_records"])
    assert n == 40, n
    print(f"{len(papers)} papers, {n} gold records, {len(answers)} answers -> {OUT}", file=sys.stderr)


if __name__ == "__main__":
    main()
