#!/usr/bin/env python3
"""Generates data/synthetic/: a small event corpus with mock fixtures.

The fixtures script every provider call of `histaxo pipeline --mock` on
this corpus. Generator replies are keyed by model and follow the
round-robin partition the inducer uses, so each generator only sees
labels from its own partition.

Run from the repository root: python3 scripts/gen_synthetic.py
"""

import json
import random
import shutil
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "data" / "synthetic"
SEED = 7
GENERATORS = ["DeepSeek-V3-0324", "qwen-plus-2025-07-28", "gpt-4o-2024-11-20"]
BOOKS = ["史記", "漢書", "後漢書", "三國志"]

# domain -> top categories -> (definition, mid categories or leaves)
# Politics has two induction rounds; every other domain has one.
POLITICS = [
    ("朝廷政務", "朝廷日常施政與人事。", [
        ("詔令頒行", "皇帝發布命令與赦令。", ["頒詔", "下詔赦免"]),
        ("官員任免", "官員的拜授與罷黜。", ["拜相", "罷免"]),
        ("考課監察", "對官員的考核與糾劾。", ["考課", "彈劾"]),
    ]),
    ("皇權更替", "帝位與皇權的轉移。", [
        ("帝位繼承", "新君登位的方式。", ["即位", "禪讓"]),
        ("立儲", "儲君的確立與廢黜。", ["立太子", "廢太子"]),
        ("外戚干政", "外戚與太后掌握朝政。", ["外戚專權", "太后臨朝"]),
    ]),
    ("叛亂與謀逆", "危及朝廷統治的變亂。", [
        ("謀反事件", "臣下圖謀推翻君主。", ["謀反", "謀逆"]),
        ("宮廷政變", "宮廷內部以武力奪權。", ["政變", "誅殺權臣"]),
        ("地方叛亂", "地方勢力起兵反抗朝廷。", ["藩鎮叛亂", "民變"]),
    ]),
    ("制度改革", "國家制度的調整與變革。", [
        ("變法改制", "全面更改法度。", ["變法", "新政"]),
        ("官制調整", "官職與行政區劃的增減。", ["設官", "省併州郡"]),
        ("都城營建", "都城的遷移與建設。", ["遷都", "營建都城"]),
    ]),
]

FLAT = {
    "Military": [
        ("征伐", "對外或對內的軍事進攻。", ["出兵", "親征", "遠征"]),
        ("攻守", "圍繞城池的攻防作戰。", ["圍城", "守城", "攻城", "破城"]),
        ("軍政", "軍隊的組建與供養。", ["募兵", "屯田", "閱兵"]),
    ],
    "Diplomacy": [
        ("遣使往來", "政權之間的使節往來。", ["遣使", "朝貢", "來朝"]),
        ("和戰", "政權之間的和好與結約。", ["和親", "結盟"]),
    ],
    "Society": [
        ("民間動亂", "民眾流離與聚眾為亂。", ["流民", "盜賊起事"]),
        ("教化", "朝廷對士民的教育與表彰。", ["興學", "旌表節義", "舉孝廉"]),
    ],
    "Ritual": [
        ("祭祀", "對天地與祖先的祭禮。", ["郊祀", "封禪", "祭宗廟"]),
        ("喪葬", "帝王與宗室的喪禮與陵墓。", ["國喪", "陵寢營建"]),
    ],
    "Economy-Livelihood": [
        ("財政", "國家的收入與貨幣。", ["賦稅", "鑄錢", "鹽鐵專賣"]),
        ("民食", "糧食短缺與救濟。", ["饑荒", "賑濟"]),
    ],
    "Nature": [
        ("水旱災害", "水、旱、蝗等災害。", ["旱災", "水災", "蝗災", "歲饑"]),
        ("天象異變", "日月星辰的異常。", ["日食"]),
    ],
    "Individual": [
        ("仕宦生涯", "個人進入與退出仕途。", ["出仕", "致仕"]),
        ("生死", "個人的死亡。", ["卒", "自殺"]),
    ],
}

FORCED_COUNTS = {"出兵": 9, "賦稅": 7, "圍城": 6, "即位": 8, "遣使": 5}

# near-duplicate pairs resolved during expansion: (text, near, similarity)
PLANTED = [
    ("謀逆", "謀反", 0.85),
    ("歲饑", "饑荒", 0.8),
]

TOPICS = [
    {"id": 0, "label": "漕運", "top_words": ["漕", "糧", "運河", "舟"]},
    {"id": 1, "label": "邊患", "top_words": ["胡", "寇", "邊", "塞"]},
    {"id": 2, "label": "雜記", "top_words": ["之", "其", "也"]},
    {"id": 3, "label": "祥瑞", "top_words": ["鳳", "麟", "甘露", "瑞"]},
    {"id": 4, "label": "亂碼", "top_words": ["口", "乙"]},
]
TOPIC_REPLIES = {
    0: [("漕糧轉運", "經運河輸送糧賦至京師。"), ("漕船失事", "漕運船隻沉沒或受阻。")],
    1: [("邊境侵擾", "外族侵掠邊郡。"), ("出兵", "發兵征討。")],
    2: [],
    3: [("祥瑞出現", "奇異吉兆被上報朝廷。")],
}
MALFORMED_TOPICS = {4}

RELATIONS = [
    {"name": "師生", "source": "CBDB"},
    {"name": "姻親", "source": "CBDB"},
    {"name": "君臣", "source": "CBDB"},
    {"name": "盟友", "source": "CBDB"},
    {"name": "敵對", "source": "CBDB"},
]
RELATION_REPLIES = {
    "師生": [("拜師", "投入名師門下受業。")],
    "姻親": [("聯姻", "兩家結為婚姻之好。")],
    "君臣": [],
    "盟友": [("結盟", "雙方訂立盟約。")],
    "敵對": [("外族寇邊", "外族軍隊侵犯邊塞。")],
}

CANDIDATE_DOMAINS = {
    "漕糧轉運": "Economy-Livelihood",
    "漕船失事": "Economy-Livelihood",
    "邊境侵擾": "Military",
    "祥瑞出現": "Nature",
    "拜師": "Individual",
    "聯姻": "Diplomacy",
    "結盟": "Diplomacy",
    "外族寇邊": "Military",
}
# label -> replies to enrich_position (the last one repeats)
POSITIONS = {
    "漕糧轉運": ["財政"],
    "漕船失事": ["漕糧轉運"],
    "邊境侵擾": ["征伐"],
    "祥瑞出現": ["祥瑞", "祥瑞"],
    "拜師": ["仕宦生涯"],
    "聯姻": ["和戰"],
}
# candidate embedding text -> (near text, similarity); candidate dedup
# embeds labels, redundancy checks embed label：definition
CANDIDATE_EMBEDDINGS = {
    "出兵：發兵征討。": ("出兵", 0.9),
    "結盟：雙方訂立盟約。": ("結盟", 0.95),
    "外族寇邊": ("邊境侵擾", 0.8),
}

EXPAND_EDITS = [
    ({"domain": "Military", "depth": "2"}, [
        {"op": "new_sibling", "label": "水師征戰", "definition": "以舟師進行的戰事。", "sibling_of": "征伐"},
    ]),
    ({"domain": "Ritual", "depth": "2"}, [
        {"op": "new_intermediate", "label": "天地祭祀", "definition": "祭祀天地山川的大典。",
         "parent": "祭祀", "children": ["郊祀", "封禪"]},
    ]),
]

CHAPTERS = {
    ("史記", "卷八"): [
        ("高祖即位於汜水之陽。", "即位", "即位"),
        ("匈奴圍城七日。", "圍城", "圍城"),
        ("天下大旱，是為旱災。", "旱災", "旱"),
    ],
    ("漢書", "卷九十四"): [
        ("以宗室女為公主，與匈奴和親。", "和親", "和親"),
        ("單于遣使奉獻。", "遣使", "遣使"),
    ],
}


def domains():
    """domain -> list of (top label, definition, children) and leaf order."""
    out = {"Politics": POLITICS}
    out.update(FLAT)
    return out


def leaves_of(name, tops):
    if name == "Politics":
        return [leaf for _, _, mids in tops for _, _, ls in mids for leaf in ls]
    return [leaf for _, _, ls in tops for leaf in ls]


def counts(all_leaves):
    rng = random.Random(SEED)
    c = {}
    for leaf in all_leaves:
        c[leaf] = FORCED_COUNTS.get(leaf, rng.randint(1, 4))
    return c


def ranked(labels, c):
    return sorted(labels, key=lambda t: (-c[t], t))


def partitions(level):
    g = max(1, min(len(GENERATORS), len(level)))
    return [(k, level[k::g]) for k in range(g)]


def induction_rules(name, tops, c):
    """generate and merge rules for one domain, one per round."""
    gen, merge = [], []
    if name == "Politics":
        rounds = [
            [(m, d, ls) for _, _, mids in tops for m, d, ls in mids],
            [(t, d, [m for m, _, _ in mids]) for t, d, mids in tops],
        ]
    else:
        rounds = [tops]
    level = ranked(leaves_of(name, tops), c)
    for r, groups in enumerate(rounds, start=1):
        parent_of = {child: (label, d) for label, d, kids in groups for child in kids}
        for k, pool in partitions(level):
            cats = []
            for item in pool:
                label, d = parent_of[item]
                hit = next((x for x in cats if x["label"] == label), None)
                if hit is None:
                    hit = {"label": label, "definition": d, "children": []}
                    cats.append(hit)
                hit["children"].append(item)
            gen.append({"when": {"domain": name, "round": str(r)}, "model": GENERATORS[k],
                        "reply": {"categories": cats}})
        merge.append({"when": {"domain": name, "round": str(r)},
                      "reply": {"categories": [{"label": label, "definition": d, "members": [label]}
                                               for label, d, _ in groups]}})
        level = [label for label, _, _ in groups]
    return gen, merge


def events(all_leaves, c):
    rng = random.Random(SEED + 1)
    out = []
    for leaf in all_leaves:
        for n in range(c[leaf]):
            book = BOOKS[(len(out) + n) % len(BOOKS)]
            out.append({
                "text": f"{book}所載第{n + 1}事：是歲{leaf}。",
                "event_type": leaf,
                "trigger": leaf,
                "book": book,
                "chapter": f"卷{rng.randint(1, 120)}",
                "extractor": "synthetic",
            })
    rng.shuffle(out)
    return out


def concept_list(pairs):
    return {"event_types": [{"label": l, "definition": d} for l, d in pairs]}


def write_json(path, value):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(value, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def main():
    if OUT.exists():
        shutil.rmtree(OUT)
    doms = domains()
    domain_of = {leaf: name for name, tops in doms.items() for leaf in leaves_of(name, tops)}
    all_leaves = list(domain_of)
    c = counts(all_leaves)

    evs = events(all_leaves, c)
    OUT.mkdir(parents=True)
    with open(OUT / "events.jsonl", "w", encoding="utf-8") as f:
        for e in evs:
            f.write(json.dumps(e, ensure_ascii=False) + "\n")
    write_json(OUT / "topics.json", TOPICS)
    write_json(OUT / "relations.json", RELATIONS)
    (OUT / "config.toml").write_text(
        "threshold = 0.6\nfrequency_threshold = 5\ntop_level_limit = 10\nmax_rounds = 6\n"
        "classify_samples = 3\n\n[gateway]\nparallelism = 4\n",
        encoding="utf-8",
    )
    for (book, chapter), items in CHAPTERS.items():
        p = OUT / "chapters" / book / f"{chapter}.txt"
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text("".join(t for t, _, _ in items) + "\n", encoding="utf-8")

    fx = OUT / "fixtures"
    write_json(fx / "extract.json", {"chat": {"extract": [
        {"when": {"book": b, "chapter": ch},
         "reply": {"events": [{"text": t, "event_type": et, "trigger": tr} for t, et, tr in items]}}
        for (b, ch), items in CHAPTERS.items()
    ]}})
    write_json(fx / "classify.json", {"chat": {"classify": [
        {"when": {"event_type": leaf}, "reply": {"domain": domain_of[leaf]}} for leaf in all_leaves
    ]}})
    gen, merge = [], []
    for name, tops in doms.items():
        g, m = induction_rules(name, tops, c)
        gen += g
        merge += m
    write_json(fx / "induce.json", {"chat": {"generate": gen, "merge": merge}})

    expand = [{"when": w, "reply": {"edits": e}} for w, e in EXPAND_EDITS]
    expand.append({"reply": {"edits": []}})
    write_json(fx / "expand.json", {"chat": {
        "judge": [{"reply": {"keep": "A", "reason": "more established label"}}],
        "judge_cross": [{"reply": {"keep": "A", "reason": "primary domain"}}],
        "expand": expand,
    }})

    topic_rules = [{"when": {"topic_id": str(t)}, "reply": concept_list(p)} for t, p in TOPIC_REPLIES.items()]
    topic_rules += [{"when": {"topic_id": str(t)}, "reply": "not json"} for t in sorted(MALFORMED_TOPICS)]
    relation_rules = [{"when": {"name": n}, "reply": concept_list(p)} for n, p in RELATION_REPLIES.items()]
    frequent = [leaf for leaf in all_leaves if c[leaf] > 5]
    domain_rules = [{"when": {"label": leaf}, "reply": {"domain": domain_of[leaf]}} for leaf in frequent]
    domain_rules += [{"when": {"label": l}, "reply": {"domain": d}} for l, d in CANDIDATE_DOMAINS.items()]
    position_rules = [{"when": {"label": l}, "replies": [{"parent": p} for p in ps]} for l, ps in POSITIONS.items()]
    write_json(fx / "enrich.json", {"chat": {
        "conceptualize_topic": topic_rules,
        "conceptualize_relation": relation_rules,
        "enrich_domain": domain_rules,
        "enrich_position": position_rules,
    }})
    write_json(fx / "evaluate.json", {"chat": {"granularity": [
        {"when": {"child_label": "日食"}, "reply": {"score": 0}},
        {"reply": {"score": 1}},
    ]}})

    emb = {}
    for name, tops in doms.items():
        groups = [ls for _, _, mids in tops for _, _, ls in mids] if name == "Politics" else [ls for _, _, ls in tops]
        for ls in groups:
            for leaf in ls[1:]:
                emb[leaf] = {"near": ls[0], "similarity": 0.45}
    for text, near, s in PLANTED:
        emb[text] = {"near": near, "similarity": s}
    for text, (near, s) in CANDIDATE_EMBEDDINGS.items():
        emb[text] = {"near": near, "similarity": s}
    write_json(fx / "embeddings.json", {"embeddings": emb})

    print(f"{len(all_leaves)} event types, {len(evs)} events, {len(frequent)} frequent")


if __name__ == "__main__":
    main()
