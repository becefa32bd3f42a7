//! The 68-point facial landmark layout.
//!
//! Index 0 is the jaw point on the subject's right (image left for a frontal
//! face); indices run jaw 0–16, brows 17–26, nose 27–35, eyes 36–47 and
//! mouth 48–67.

pub const NUM_LANDMARKS: usize = 68;

/// Left-right counterpart of every landmark (centerline points map to
/// themselves).
pub const MIRROR: [usize; NUM_LANDMARKS] = [
    16, 15, 14, 13, 12, 11, 10, 9, 8, 7, 6, 5, 4, 3, 2, 1, 0, // jaw
    26, 25, 24, 23, 22, 21, 20, 19, 18, 17, // brows
    27, 28, 29, 30, 35, 34, 33, 32, 31, // nose
    45, 44, 43, 42, 47, 46, 39, 38, 37, 36, 41, 40, // eyes
    54, 53, 52, 51, 50, 49, 48, 59, 58, 57, 56, 55, // outer mouth
    64, 63, 62, 61, 60, 67, 66, 65, // inner mouth
];

pub const NOSE_TIP: usize = 30;

/// Default 5-point subset: eye outer corners (image left, image right), nose
/// tip, mouth corners (image left, image right).
pub const FIVE_POINTS: [usize; 5] = [36, 45, 30, 48, 54];

/// Mirrored pairs `(subject right, subject left)`.
pub fn mirror_pairs() -> Vec<(usize, usize)> {
    (0..NUM_LANDMARKS)
        .filter(|&i| MIRROR[i] != i && is_subject_right(i))
        .map(|i| (i, MIRROR[i]))
        .collect()
}

/// True for points on the subject's right half of the face.
pub fn is_subject_right(i: usize) -> bool {
    matches!(i, 0..=7 | 17..=21 | 31 | 32 | 36..=41 | 48..=50 | 58..=61 | 67)
}
