//! Rigid-transform basics: composition, inversion, adjoints, and the
//! exponential/logarithm maps.
//!
//! ```bash
//! cargo run --example pose_algebra
//! ```

use std::f64::consts::PI;

use nalgebra::DVector;
use spectral_pgo::{Dim, Pose};

fn main() {
    // a quarter turn followed by a unit step lands on the +y axis
    let turn = Pose::se2(0.0, 0.0, PI / 2.0);
    let step = Pose::se2(1.0, 0.0, 0.0);
    let composed = turn.compose(&step).unwrap();
    let p = composed.as_planar().unwrap();
    println!("quarter turn then step: ({:.3}, {:.3}, {:.3})", p.x, p.y, p.theta());

    // inverse undoes the motion
    let round_trip = composed.compose(&composed.inverse()).unwrap();
    let r = round_trip.as_planar().unwrap();
    println!("composed with inverse:  ({:.1e}, {:.1e}, {:.1e})", r.x, r.y, r.theta());

    // the adjoint carries tangent vectors across the frame change:
    // Ad_a v == log(a * exp(v) * a^{-1})
    let pose = Pose::se2(2.0, -1.0, 0.8);
    let ad = pose.adjoint();
    println!("\nadjoint of (2, -1, 0.8):\n{:.4}", ad.matrix());
    let v = vec![0.1, -0.05, 0.2];
    let direct = ad.apply(&DVector::from_vec(v.clone()));
    let conjugated = pose
        .compose(&Pose::exp(Dim::Two, &v).unwrap())
        .unwrap()
        .compose(&pose.inverse())
        .unwrap()
        .log()
        .unwrap();
    println!("Ad * v                 = {:?}", direct.as_slice());
    println!("log(a exp(v) a^-1)     = {:?}", conjugated.as_slice());

    // exp/log round-trip in 3D
    let twist = vec![0.3, -0.2, 0.5, 0.1, -0.4, 0.25];
    let pose3 = Pose::exp(Dim::Three, &twist).unwrap();
    let back = pose3.log().unwrap();
    let worst = twist
        .iter()
        .zip(back.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!("\n3D exp/log round-trip max deviation: {worst:.2e}");
}
