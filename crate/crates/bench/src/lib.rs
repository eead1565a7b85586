//! Inputs shared by the benchmarks.

use safegate_core::imaging::Frame;
use safegate_core::synth::{add_noise, background, face_crop, paste, FaceJitter};

/// Two noisy grayscale frames of one scene; the second has a face pasted in.
pub fn scene_pair(width: u32, height: u32) -> (Frame, Frame) {
    let bg = background(width, height, 1, 7);
    let mut prev = bg.clone();
    let mut curr = bg;
    let face = safegate_core::imaging::to_grayscale(&face_crop(3, &FaceJitter::none()));
    paste(&mut curr, &face, width / 3, height / 4);
    add_noise(&mut prev, 3.0, 1);
    add_noise(&mut curr, 3.0, 2);
    (prev, curr)
}

/// An RGB frame with the given background level, for lighting work.
pub fn rgb_scene(width: u32, height: u32) -> Frame {
    let mut f = background(width, height, 3, 11);
    add_noise(&mut f, 3.0, 5);
    f
}
