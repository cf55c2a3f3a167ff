use super::Region;

/// `(modality) name` per line; 497 classes.
pub const DEFAULT_CLASS_NAMES: &str = include_str!("../../data/class_names.txt");

const LESION_WORDS: &[&str] = &[
    "tumor", "cancer", "infection", "hemorrhage", "cyst", "nodule", "effusion", "embolism",
    "edema", "scar", "stroke", "schwannoma", "hyperintensities", "lymph node", "lesion",
    "metastasis",
];

/// Structures spanning several body regions, matched on the whole name.
const WHOLE_BODY_NAMES: &[&str] = &["bone", "fat", "muscle", "skin", "aorta", "inferior vena cava"];

/// Phrase rules evaluated in order; the first match decides the region.
const REGION_RULES: &[(Region, &[&str])] = &[
    (
        Region::Spine,
        &[
            "vertebrae", "intervertebral disc", "intervertebral discs", "spinal canal",
            "spinal cord", "autochthon",
        ],
    ),
    (
        Region::Brain,
        &[
            "brain", "brainstem", "cerebellum", "cerebrospinal fluid", "gyrus", "cortex",
            "hippocampus", "amygdala", "thalamus", "putamen", "pallidum", "caudate nucleus",
            "nucleus accumbens", "substantia nigra", "corpus callosum", "insula",
            "lateral ventricle", "third ventricle", "grey matter", "white matter",
            "basal ganglia", "optic radiation", "corticospinal tract", "frontal lobe",
            "temporal lobe", "occipital lobe", "parietal lobe", "subcallosal area", "cuneus",
            "pituitary gland", "cingulate gyrus", "deep grey matter",
        ],
    ),
    (
        Region::Abdomen,
        &[
            "liver", "caudate lobe", "kidney", "adrenal gland", "pancreas", "spleen", "stomach",
            "gallbladder", "duodenum", "intestine", "small bowel", "colon",
            "portal vein and splenic vein", "renal artery", "renal vein", "celiac trunk",
            "abdominal tissue",
        ],
    ),
    (
        Region::HeadNeck,
        &[
            "eyeball", "lens", "optic nerve", "optic chiasm", "cochlea", "middle ear",
            "tympanic cavity", "vestibule semicircular canal", "eustachian tube bone",
            "internal auditory canal", "mastoid process", "mandible", "temporomandibular joint",
            "parotid gland", "submandibular gland", "lacrimal gland", "thyroid", "thyroid gland",
            "larynx", "larynx glottis", "larynx supraglottis", "arytenoid",
            "pharynx constrictor muscle", "cricopharyngeal inlet", "oral cavity", "nasal cavity",
            "lips", "buccal mucosa", "cheek", "carotid artery", "common carotid artery",
            "internal carotid artery", "internal jugular vein", "skull", "cervical esophagus",
            "inferior alveolar nerve",
        ],
    ),
    (
        Region::Thorax,
        &[
            "lung", "lung lower lobe", "lung upper lobe", "lung middle lobe", "heart", "atrium",
            "ventricle", "myocardium", "auricle of heart", "pulmonary artery", "pulmonary vein",
            "trachea", "bronchie", "esophagus", "thymus", "mediastinal tissue", "thoracic cavity",
            "breast", "rib", "costal cartilage", "rib cartilage", "manubrium of sternum",
            "sternum", "superior vena cava", "brachiocephalic trunk", "brachiocephalic vein",
            "subclavian artery",
        ],
    ),
    (Region::UpperLimb, &["humerus", "scapula", "clavicle"]),
    (Region::LowerLimb, &["femur", "head of femur", "tibia", "femur cartilage", "tibia cartilage"]),
    (
        Region::Pelvis,
        &[
            "prostate", "urinary bladder", "rectum", "uterus", "uterocervix", "gonad", "hip",
            "gluteus maximus", "gluteus medius", "gluteus minimus", "iliac artery", "iliac vena",
            "iliopsoas", "sacrum",
        ],
    ),
];

/// True when `phrase` occurs in `name` bounded by word edges.
fn has_phrase(name: &str, phrase: &str) -> bool {
    let bytes = name.as_bytes();
    name.match_indices(phrase).any(|(at, _)| {
        let end = at + phrase.len();
        let before_ok = at == 0 || !bytes[at - 1].is_ascii_alphanumeric();
        let after_ok = end == bytes.len() || !bytes[end].is_ascii_alphanumeric();
        before_ok && after_ok
    })
}

pub fn is_lesion_name(name: &str) -> bool {
    let lower = name.to_ascii_lowercase();
    LESION_WORDS.iter().any(|w| has_phrase(&lower, w))
}

/// Body region of a class name; lesions map to [`Region::Lesion`]. Returns
/// `None` when no rule matches.
pub fn infer_region(name: &str) -> Option<Region> {
    let lower = name.to_ascii_lowercase();
    if is_lesion_name(&lower) {
        return Some(Region::Lesion);
    }
    let base = lower
        .strip_prefix("left ")
        .or_else(|| lower.strip_prefix("right "))
        .unwrap_or(&lower);
    if WHOLE_BODY_NAMES.contains(&base) {
        return Some(Region::WholeBody);
    }
    REGION_RULES
        .iter()
        .find(|(_, phrases)| phrases.iter().any(|p| has_phrase(&lower, p)))
        .map(|(r, _)| *r)
}
