"""Built-in clinical term list and a small ICD-10 vocabulary.

Both exist for the deterministic test doubles (oracle judge, stub code
predictor); neither claims clinical completeness. Terms are matched
casefolded.
"""

from __future__ import annotations

from pathlib import Path

__all__ = ["DEFAULT_CLINICAL_LEXICON", "DEFAULT_ICD_VOCABULARY", "load_lexicon"]

DEFAULT_CLINICAL_LEXICON: frozenset[str] = frozenset(
    {
        # medications
        "aspirin", "insulin", "metformin", "warfarin", "lisinopril", "atorvastatin",
        "amlodipine", "metoprolol", "omeprazole", "prednisone", "ibuprofen",
        "acetaminophen", "hydrochlorothiazide", "gabapentin", "furosemide",
        "levothyroxine", "sertraline", "amoxicillin", "azithromycin", "ramipril",
        "clopidogrel", "apixaban", "rivaroxaban", "methotrexate", "hydroxychloroquine",
        "sulfasalazine", "adalimumab", "etanercept", "infliximab", "naproxen",
        "celecoxib", "tramadol", "morphine", "oxycodone", "allopurinol",
        "colchicine", "folate", "calcium", "vitamin",
        # conditions
        "hypertension", "diabetes", "asthma", "copd", "pneumonia", "anemia",
        "arthritis", "osteoarthritis", "rheumatoid", "lupus", "gout", "psoriasis",
        "fibromyalgia", "osteoporosis", "vasculitis", "scleroderma", "sjogren",
        "spondylitis", "depression", "anxiety", "hypothyroidism", "hyperlipidemia",
        "obesity", "cancer", "carcinoma", "lymphoma", "stroke", "infarction",
        "angina", "fibrillation", "embolism", "thrombosis", "sepsis", "cellulitis",
        "nephropathy", "neuropathy", "retinopathy", "cirrhosis", "hepatitis",
        "pancreatitis", "diverticulitis", "migraine", "epilepsy", "dementia",
        # anatomy / findings
        "joint", "knee", "hip", "shoulder", "wrist", "ankle", "spine", "cervical",
        "lumbar", "swelling", "effusion", "stiffness", "tenderness", "erythema",
        "rash", "fever", "fatigue", "nausea", "dyspnea", "edema", "pain",
        "synovitis", "nodules", "fracture", "lesion", "mass", "murmur",
        # labs / imaging / procedures
        "hemoglobin", "creatinine", "glucose", "cholesterol", "triglycerides",
        "platelets", "leukocytes", "esr", "crp", "ana", "anti", "ccp",
        "rheumatoid-factor", "tsh", "hba1c", "urinalysis", "biopsy", "xray",
        "x-ray", "mri", "ultrasound", "radiograph", "densitometry", "injection",
        "arthroplasty", "arthroscopy", "infusion", "chemotherapy", "dialysis",
        # dosing language
        "mg", "mcg", "ml", "units", "dose", "daily", "weekly", "bid", "tid",
        "prn", "tablet", "capsule", "subcutaneous", "intravenous", "oral",
        "stop", "start", "increase", "decrease", "taper", "continue",
    }
)

DEFAULT_ICD_VOCABULARY: tuple[str, ...] = (
    "E11.9",   # type 2 diabetes
    "E78.5",   # hyperlipidemia
    "I10",     # essential hypertension
    "I25.10",  # atherosclerotic heart disease
    "J18.9",   # pneumonia
    "J45.909", # asthma
    "K21.9",   # reflux
    "M05.79",  # rheumatoid arthritis
    "M54.5",   # low back pain
    "N18.3",   # chronic kidney disease
)


def load_lexicon(path: str | Path) -> frozenset[str]:
    """One term per line; blank lines and #-comments ignored."""
    terms = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            terms.add(line.casefold())
    return frozenset(terms)
