//! Acceptance suite. Each criterion runs on its own thread and reports one
//! PASS/FAIL line; the process exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use schemasim::dsl::{compile_source, parse_assemblage_bytes, render_assemblage, Diagnostic};
use schemasim::fields::{
    attractive_force, attractive_gradients, attractive_potential, repulsive_force, repulsive_gradients,
    repulsive_potential, AttractiveParams, Branch, RepulsiveParams,
};
use schemasim::fsm::{Fsm, Releaser, StateId, Transition};
use schemasim::schemas::{Role, SchemaParams, FORWARD_SOURCE, GOALKEEPER_SOURCE, HOM_FOR_SOURCE};
use schemasim::vec2::{KinematicState, Vec2};
use schemasim::world::{init_world, run_simulation, AttractorStatus, Event, ScenarioConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, rtol: f64, atol: f64) -> bool {
    (a - b).abs() <= atol + rtol * a.abs().max(b.abs())
}

// 1. Reference tables.

fn criterion_1() -> Outcome {
    let golden = workspace().join("crates/core/tests/golden");
    let cases = [
        (HOM_FOR_SOURCE, "foraging.table", 6, 10, 10),
        (FORWARD_SOURCE, "forward.table", 4, 6, 5),
        (GOALKEEPER_SOURCE, "goalkeeper.table", 4, 6, 5),
    ];
    for (source, file, states, transitions, releasers) in cases {
        let fsm = compile_source(source).map_err(|d| format!("{file}: {d:?}"))?;
        let expected = std::fs::read_to_string(golden.join(file)).map_err(|e| format!("{file}: {e}"))?;
        ensure(fsm.to_table() == expected, || format!("{file}: table differs:\n{}", fsm.to_table()))?;
        ensure(fsm.states.len() == states, || format!("{file}: {} states", fsm.states.len()))?;
        ensure(fsm.transitions.len() == transitions, || format!("{file}: {} transitions", fsm.transitions.len()))?;
        ensure(fsm.alphabet.len() == releasers, || format!("{file}: {} releasers", fsm.alphabet.len()))?;
    }
    Ok("3 tables byte-equal".into())
}

// 2. Analytic gradients against central differences.

const H: f64 = 1e-6;

/// Central difference of `f` over the four coordinates `(px, py, vx, vy)`.
fn central_diff(f: impl Fn(Vec2, Vec2) -> f64, s: &KinematicState) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut dp = Vec2::ZERO;
        let mut dv = Vec2::ZERO;
        match k {
            0 => dp.x = H,
            1 => dp.y = H,
            2 => dv.x = H,
            _ => dv.y = H,
        }
        *slot = (f(s.p + dp, s.v + dv) - f(s.p - dp, s.v - dv)) / (2.0 * H);
    }
    out
}

fn vec_close(analytic: [f64; 4], numeric: [f64; 4]) -> bool {
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let scale: f64 = numeric.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff <= 1e-9 + 1e-4 * scale
}

fn random_state(rng: &mut ChaCha8Rng, span: f64) -> KinematicState {
    KinematicState::new(
        Vec2::new(rng.random_range(-span..span), rng.random_range(-span..span)),
        Vec2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut attractive = 0;
    while attractive < 1000 {
        let params = AttractiveParams::new(
            rng.random_range(0.1..3.0),
            rng.random_range(0.0..3.0),
            rng.random_range(1.0..4.0),
            rng.random_range(1.0..4.0),
        )
        .map_err(|e| e.to_string())?;
        let robot = random_state(&mut rng, 5.0);
        let target = random_state(&mut rng, 5.0);
        if (target.p - robot.p).norm() < 0.05 || (target.v - robot.v).norm() < 0.05 {
            continue;
        }
        let (gp, gv) = attractive_gradients(&robot, &target, &params).map_err(|e| e.to_string())?;
        let fd = central_diff(
            |p, v| attractive_potential(&KinematicState::new(p, v), &target, &params),
            &robot,
        );
        ensure(vec_close([gp.x, gp.y, gv.x, gv.y], fd), || {
            format!("attractive gradient mismatch at {robot:?} / {target:?}: {gp:?} {gv:?} vs {fd:?}")
        })?;
        let f = attractive_force(&robot, &target, &params).map_err(|e| e.to_string())?;
        let fd_force = [-(fd[0] + fd[2]), -(fd[1] + fd[3])];
        let scale = fd_force[0].hypot(fd_force[1]);
        ensure(((f.x - fd_force[0]).hypot(f.y - fd_force[1])) <= 1e-9 + 1e-4 * scale, || {
            format!("attractive force mismatch: {f:?} vs {fd_force:?}")
        })?;
        attractive += 1;
    }

    let mut repulsive = 0;
    let mut tries = 0;
    while repulsive < 1000 {
        tries += 1;
        ensure(tries < 1_000_000, || "could not sample active-branch configurations".into())?;
        let params = RepulsiveParams::new(
            rng.random_range(0.1..3.0),
            rng.random_range(0.3..3.0),
            rng.random_range(0.5..8.0),
            1e12,
        )
        .map_err(|e| e.to_string())?;
        let robot = random_state(&mut rng, 3.0);
        let obstacle = random_state(&mut rng, 3.0);
        let r = obstacle.p - robot.p;
        let rho_s = r.norm();
        if rho_s < 0.05 {
            continue;
        }
        let v_ro = (robot.v - obstacle.v).dot(r * (1.0 / rho_s));
        let margin = rho_s - v_ro * v_ro / (2.0 * params.a_max);
        // Smooth regime: strictly inside the active branch, away from its edges.
        if v_ro < 1e-2 || margin < 0.05 || margin > params.rho_0 - 1e-3 {
            continue;
        }
        let (gp, gv) = repulsive_gradients(&robot, &obstacle, &params).map_err(|e| e.to_string())?;
        let potential = |p: Vec2, v: Vec2| {
            repulsive_potential(&KinematicState::new(p, v), &obstacle, &params)
                .ok()
                .and_then(|s| s.potential)
                .unwrap_or(f64::NAN)
        };
        let fd = central_diff(potential, &robot);
        ensure(vec_close([gp.x, gp.y, gv.x, gv.y], fd), || {
            format!("repulsive gradient mismatch at {robot:?} / {obstacle:?}: {gp:?} {gv:?} vs {fd:?}")
        })?;
        let f = repulsive_force(&robot, &obstacle, &params).map_err(|e| e.to_string())?.force;
        let fd_force = [-(fd[0] + fd[2]), -(fd[1] + fd[3])];
        let scale = fd_force[0].hypot(fd_force[1]);
        ensure(((f.x - fd_force[0]).hypot(f.y - fd_force[1])) <= 1e-9 + 1e-4 * scale, || {
            format!("repulsive force mismatch: {f:?} vs {fd_force:?}")
        })?;
        repulsive += 1;
    }
    Ok(format!("{attractive} attractive + {repulsive} repulsive configurations"))
}

// 3. Repulsive branch structure.

/// Robot at the origin moving along +x at `speed` toward a static obstacle
/// placed so that `ρ_s − ρ_m = margin`.
fn head_on(speed: f64, margin: f64, p: &RepulsiveParams) -> (KinematicState, KinematicState) {
    let rho_s = margin + speed * speed / (2.0 * p.a_max);
    (
        KinematicState::new(Vec2::ZERO, Vec2::new(speed, 0.0)),
        KinematicState::at_rest(Vec2::new(rho_s, 0.0)),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    for _ in 0..2000 {
        let p = RepulsiveParams::new(
            rng.random_range(0.1..3.0),
            rng.random_range(0.2..3.0),
            rng.random_range(0.5..8.0),
            rng.random_range(0.5..10.0),
        )
        .map_err(|e| e.to_string())?;
        let robot = random_state(&mut rng, 3.0);
        let obstacle = random_state(&mut rng, 3.0);
        let r = obstacle.p - robot.p;
        let rho_s = r.norm();
        if rho_s == 0.0 {
            continue;
        }
        let v_ro = (robot.v - obstacle.v).dot(r * (1.0 / rho_s));
        let margin = rho_s - v_ro * v_ro / (2.0 * p.a_max);
        let pot = repulsive_potential(&robot, &obstacle, &p).map_err(|e| e.to_string())?;
        let f = repulsive_force(&robot, &obstacle, &p).map_err(|e| e.to_string())?;
        if v_ro <= 0.0 || margin >= p.rho_0 {
            ensure(pot.potential == Some(0.0) && f.force == Vec2::ZERO && f.branch == Branch::Zero, || {
                format!("non-zero field outside range: v_ro={v_ro} margin={margin} {f:?}")
            })?;
        } else if margin <= 0.0 {
            ensure(f.branch == Branch::UndefinedCollision && pot.potential.is_none(), || {
                format!("expected undefined branch: {f:?}")
            })?;
            ensure(close(f.force.norm(), p.f_max, 1e-12, 0.0), || {
                format!("collision force {} != f_max {}", f.force.norm(), p.f_max)
            })?;
            ensure(f.force.dot(r) < 0.0, || "collision force points toward obstacle".into())?;
        }
        checked += 1;
    }

    // Targeted cases on each side of both edges.
    let p = RepulsiveParams::new(1.3, 0.8, 2.5, 7.0).map_err(|e| e.to_string())?;
    for speed in [-1.0, -1e-9, 0.0] {
        let (robot, obstacle) = head_on(speed, 0.1, &p);
        let f = repulsive_force(&robot, &obstacle, &p).map_err(|e| e.to_string())?;
        ensure(f.force == Vec2::ZERO && f.potential == Some(0.0), || format!("receding speed {speed}: {f:?}"))?;
    }
    for margin in [-0.5, -1e-6, 0.0] {
        let (robot, obstacle) = head_on(3.0, margin, &p);
        let f = repulsive_force(&robot, &obstacle, &p).map_err(|e| e.to_string())?;
        ensure(f.branch == Branch::UndefinedCollision && close(f.force.norm(), p.f_max, 1e-12, 0.0), || {
            format!("margin {margin}: {f:?}")
        })?;
    }
    let mut previous = f64::INFINITY;
    for delta in [1e-3, 1e-4, 1e-5, 1e-6] {
        let (robot, obstacle) = head_on(1.0, p.rho_0 + delta, &p);
        let outside = repulsive_force(&robot, &obstacle, &p).map_err(|e| e.to_string())?;
        ensure(outside.force == Vec2::ZERO && outside.potential == Some(0.0), || {
            format!("outside boundary by {delta}: {outside:?}")
        })?;
        let (robot, obstacle) = head_on(1.0, p.rho_0 - delta, &p);
        let u = repulsive_potential(&robot, &obstacle, &p)
            .map_err(|e| e.to_string())?
            .potential
            .ok_or("inside boundary: undefined potential")?;
        let expected = p.eta * delta / (p.rho_0 * (p.rho_0 - delta));
        ensure(close(u, expected, 1e-6, 0.0), || format!("offset {delta}: U={u}, expected {expected}"))?;
        ensure(u > 0.0 && u < previous, || format!("potential not shrinking at offset {delta}: {u}"))?;
        ensure(u <= 1.01 * p.eta / (p.rho_0 * p.rho_0) * delta, || format!("potential not O(offset): {u}"))?;
        previous = u;
    }
    Ok(format!("{checked} random configurations, boundary offsets 1e-3..1e-6"))
}

// 4. Determinism through the CLI.

fn run_cli(config: &Path, seed: u64, out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_schemasim"))
        .args(["run", "--config"])
        .arg(config)
        .args(["--seed", &seed.to_string(), "--out"])
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.success(), || {
        format!("run {} seed {seed} failed: {}", config.display(), String::from_utf8_lossy(&status.stderr))
    })?;
    std::fs::read(out.join("trace.jsonl")).map_err(|e| e.to_string())
}

fn criterion_4() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let configs = ["foraging.toml", "soccer.toml", "micro_foraging.toml"];
    let results: Vec<Result<(), String>> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|name| {
                let dir = tmp.path().join(name);
                s.spawn(move || {
                    let config = workspace().join("scenarios").join(name);
                    let a = run_cli(&config, 7, &dir.join("a"))?;
                    let b = run_cli(&config, 7, &dir.join("b"))?;
                    ensure(a == b, || format!("{name}: same seed gave different traces"))?;
                    let c = run_cli(&config, 8, &dir.join("c"))?;
                    ensure(a != c, || format!("{name}: seeds 7 and 8 gave identical traces"))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err("panicked".into()))).collect()
    });
    for r in results {
        r?;
    }
    Ok(format!("{} configs byte-identical per seed, distinct across seeds", configs.len()))
}

// 5. Foraging completion and conservation.

fn foraging_seed(seed: u64) -> Result<bool, String> {
    let cfg = ScenarioConfig::foraging_demo();
    let mut world = init_world(&cfg, seed).map_err(|e| e.to_string())?;
    let total = world.attractors.len();
    let check = |w: &schemasim::world::WorldState| -> Result<(), String> {
        ensure(w.attractors.len() == total, || format!("seed {seed} tick {}: attractor count changed", w.tick))?;
        let ids: BTreeSet<u32> = w.attractors.iter().map(|a| a.id).collect();
        ensure(ids.len() == total, || format!("seed {seed} tick {}: duplicate attractor ids", w.tick))?;
        for a in &w.attractors {
            if let AttractorStatus::Held(robot) = a.status {
                let holders: Vec<_> = w.robots.iter().filter(|r| r.gripper == Some(a.id)).collect();
                ensure(holders.len() == 1 && holders[0].id == robot, || {
                    format!("seed {seed} tick {}: attractor {} held inconsistently", w.tick, a.id)
                })?;
            }
        }
        for r in &w.robots {
            if let Some(g) = r.gripper {
                let held = w.attractors.iter().find(|a| a.id == g).map(|a| a.status);
                ensure(held == Some(AttractorStatus::Held(r.id)), || {
                    format!("seed {seed} tick {}: robot {} grips {g} which it does not hold", w.tick, r.id)
                })?;
            }
        }
        Ok(())
    };
    check(&world)?;
    while world.tick < 50_000 && !world.is_complete() {
        world.step().map_err(|e| e.to_string())?;
        check(&world)?;
    }
    let delivered = world.attractors.iter().filter(|a| a.status == AttractorStatus::Delivered).count();
    Ok(delivered == total)
}

fn criterion_5() -> Outcome {
    let results: Vec<Result<bool, String>> = std::thread::scope(|s| {
        let handles: Vec<_> = (1..=20u64).map(|seed| s.spawn(move || foraging_seed(seed))).collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err("panicked".into()))).collect()
    });
    let mut complete = 0;
    for r in results {
        complete += usize::from(r?);
    }
    ensure(complete >= 18, || format!("{complete}/20 seeds completed"))?;
    Ok(format!("{complete}/20 seeds delivered everything, conservation held"))
}

// 6. Soccer behavior shape.

struct SoccerSeed {
    forwards_ok: bool,
    keeper_fraction: f64,
    hits: usize,
    bad_hits: Vec<String>,
}

fn soccer_seed(seed: u64) -> Result<SoccerSeed, String> {
    let cfg = ScenarioConfig::soccer_demo();
    let out = run_simulation(&cfg, seed).map_err(|e| e.to_string())?;
    let meta = out.trace[0].meta.clone().ok_or("missing meta")?;
    let (w, h) = (meta.geometry.width, meta.geometry.height);
    let later = &out.trace[1..];

    let mut forwards_ok = true;
    for m in meta.robots.iter().filter(|m| m.role == Role::Forward) {
        let mut seq: Vec<&str> = Vec::new();
        for rec in later {
            let s = rec.robots[m.id as usize].state.as_str();
            if seq.last() != Some(&s) {
                seq.push(s);
            }
        }
        forwards_ok &= seq.windows(3).any(|w| w == ["WANDER", "GO_TO_BALL", "BEHIND_BALL"]);
    }

    // Own third, middle column; the field is symmetric so only x depends on team.
    let mut inside = 0usize;
    let mut total = 0usize;
    for m in meta.robots.iter().filter(|m| m.role == Role::GoalKeeper) {
        for rec in later {
            let r = &rec.robots[m.id as usize];
            let own_third = match m.team {
                schemasim::arena::Team::Red => r.x <= w / 3.0,
                schemasim::arena::Team::Blue => r.x >= 2.0 * w / 3.0,
            };
            let middle = r.y >= h / 3.0 && r.y <= 2.0 * h / 3.0;
            inside += usize::from(own_third && middle);
            total += 1;
        }
    }

    let mut hits = 0;
    let mut bad_hits = Vec::new();
    for rec in later {
        for e in &rec.events {
            if let Event::HitBall { robot, normal_before, normal_after } = e {
                hits += 1;
                if normal_after <= normal_before {
                    bad_hits.push(format!("seed {seed} tick {} robot {robot}: {normal_before} -> {normal_after}", rec.tick));
                }
            }
        }
    }
    Ok(SoccerSeed { forwards_ok, keeper_fraction: inside as f64 / total.max(1) as f64, hits, bad_hits })
}

fn criterion_6() -> Outcome {
    let results: Vec<Result<SoccerSeed, String>> = std::thread::scope(|s| {
        let handles: Vec<_> = (1..=10u64).map(|seed| s.spawn(move || soccer_seed(seed))).collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err("panicked".into()))).collect()
    });
    let mut failures = Vec::new();
    let mut min_keeper = f64::INFINITY;
    let mut hits = 0;
    for (i, r) in results.into_iter().enumerate() {
        let r = r?;
        let seed = i + 1;
        if !r.forwards_ok {
            failures.push(format!("(a) seed {seed}: a forward never went WANDER->GO_TO_BALL->BEHIND_BALL"));
        }
        if r.keeper_fraction < 0.95 {
            failures.push(format!("(b) seed {seed}: keeper in zone {:.3} of ticks", r.keeper_fraction));
        }
        min_keeper = min_keeper.min(r.keeper_fraction);
        hits += r.hits;
        failures.extend(r.bad_hits.into_iter().map(|b| format!("(c) {b}")));
    }
    ensure(hits > 0, || "no hit_ball events at all".into())?;
    ensure(failures.is_empty(), || failures.join("; "))?;
    Ok(format!("forward paths present, keeper occupancy >= {min_keeper:.3}, {hits} hits all accelerate the ball"))
}

// 7. Attack snapshot force directions.

fn attr(tag: &str, name: &str) -> Result<f64, String> {
    let key = format!(" {name}=\"");
    let start = tag.find(&key).ok_or_else(|| format!("missing {name}"))? + key.len();
    let end = tag[start..].find('"').ok_or("unterminated attribute")? + start;
    tag[start..end].parse().map_err(|e| format!("{name}: {e}"))
}

fn element<'a>(svg: &'a str, marker: &str) -> Result<&'a str, String> {
    let at = svg.find(marker).ok_or_else(|| format!("no element {marker}"))?;
    let begin = svg[..at].rfind('<').ok_or("malformed svg")?;
    let end = svg[at..].find('>').ok_or("malformed svg")? + at;
    Ok(&svg[begin..=end])
}

fn criterion_7() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let svg_path = tmp.path().join("attack.svg");
    let snapshot = workspace().join("scenarios/attack_snapshot.toml");
    let out = Command::new(env!("CARGO_BIN_EXE_schemasim"))
        .args(["plot", "forcefield"])
        .arg(&snapshot)
        .arg("--out")
        .arg(&svg_path)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    let svg = std::fs::read_to_string(&svg_path).map_err(|e| e.to_string())?;

    let arrow = element(&svg, "class=\"robot-force\"")?;
    let robot = Vec2::new(attr(arrow, "data-x")?, attr(arrow, "data-y")?);
    let force = Vec2::new(attr(arrow, "data-fx")?, attr(arrow, "data-fy")?);
    let ball_el = element(&svg, "id=\"ball\"")?;
    let ball = Vec2::new(attr(ball_el, "data-x")?, attr(ball_el, "data-y")?);
    let target_el = element(&svg, "id=\"target\"")?;
    let target = Vec2::new(attr(target_el, "data-x")?, attr(target_el, "data-y")?);

    // Behind-ball point: offset beyond the ball on the line from the
    // opponent goal center (24, 8) through the ball.
    let goal = Vec2::new(24.0, 8.0);
    let offset = SchemaParams::default().behind_offset;
    let away = (ball - goal) * (1.0 / (ball - goal).norm());
    let expected = ball + away * offset;
    ensure(target.distance(expected) < 1e-9, || format!("target {target:?}, expected {expected:?}"))?;

    let toward_target = force.dot(target - robot);
    let toward_ball = force.dot(ball - robot);
    ensure(toward_target > 0.0, || format!("force {force:?} does not point toward the target"))?;
    ensure(toward_ball < 0.0, || format!("force {force:?} does not point away from the ball"))?;
    Ok(format!("force ({:.4}, {:.4}): toward target {toward_target:.4}, toward ball {toward_ball:.4}", force.x, force.y))
}

// 8. Parser robustness and round trip.

fn diagnostics_located(ds: &[Diagnostic]) -> bool {
    !ds.is_empty() && ds.iter().all(|d| d.span.line >= 1 && d.span.column >= 1)
}

const TOKENS: &[&str] = &[
    "OFF", "WANDER", "GO", "X_1", "on", "off", "hit_ball", "a1", "=", ",", ".", "(", ")", "|", "->", "-", ">",
    " ", "\n", "\t", "//", "// note\n", "\u{e9}", "Ab", "_x", "9",
];

fn mutate(rng: &mut ChaCha8Rng, source: &[u8]) -> Vec<u8> {
    let mut bytes = source.to_vec();
    for _ in 0..rng.random_range(1..6) {
        let len = bytes.len();
        match rng.random_range(0..5) {
            0 if len > 0 => {
                let i = rng.random_range(0..len);
                bytes[i] = rng.random();
            }
            1 if len > 0 => {
                let i = rng.random_range(0..len);
                bytes.remove(i);
            }
            2 => {
                let i = rng.random_range(0..=len);
                let tok = TOKENS[rng.random_range(0..TOKENS.len())];
                bytes.splice(i..i, tok.bytes());
            }
            3 if len > 1 => {
                let a = rng.random_range(0..len);
                let b = rng.random_range(a..len);
                bytes.drain(a..b);
            }
            _ => {
                let i = rng.random_range(0..=len);
                bytes.insert(i, rng.random_range(0x20..0x7f));
            }
        }
    }
    bytes
}

fn random_machine(rng: &mut ChaCha8Rng, k: usize) -> Fsm {
    let n = rng.random_range(1..8u32);
    let states: Vec<StateId> = (0..n).map(|i| StateId::new(i, format!("S{i}_{k}"))).collect();
    let pool: Vec<String> = (0..rng.random_range(1..7)).map(|i| format!("r{i}")).collect();
    let mut transitions = Vec::new();
    let mut alphabet = BTreeSet::new();
    for from in 0..n {
        let count = rng.random_range(1..=pool.len());
        let mut names = pool.clone();
        for i in 0..count {
            let j = rng.random_range(i..names.len());
            names.swap(i, j);
        }
        for name in &names[..count] {
            let releaser = Releaser::new(name.clone()).expect("valid releaser");
            alphabet.insert(releaser.clone());
            transitions.push(Transition { from, releaser, to: rng.random_range(0..n) });
        }
    }
    Fsm::new(format!("M{k}"), states, alphabet, transitions, 0, BTreeSet::from([0]))
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let valid: Vec<&[u8]> =
        vec![HOM_FOR_SOURCE.as_bytes(), FORWARD_SOURCE.as_bytes(), GOALKEEPER_SOURCE.as_bytes()];
    let mut inputs: Vec<Vec<u8>> = Vec::new();
    for _ in 0..10_000 {
        let mut b = vec![0u8; rng.random_range(0..200)];
        rng.fill_bytes(&mut b);
        inputs.push(b);
    }
    for _ in 0..5_000 {
        let s: String = (0..rng.random_range(0..40)).map(|_| TOKENS[rng.random_range(0..TOKENS.len())]).collect();
        inputs.push(s.into_bytes());
    }
    for _ in 0..10_000 {
        let src = valid[rng.random_range(0..valid.len())];
        inputs.push(mutate(&mut rng, src));
    }

    let mut rejected = 0;
    for input in &inputs {
        let result = catch_unwind(AssertUnwindSafe(|| {
            parse_assemblage_bytes(input).and_then(|ast| schemasim::dsl::compile_assemblage(&ast))
        }))
        .map_err(|_| format!("parser panicked on {:?}", String::from_utf8_lossy(input)))?;
        if let Err(ds) = result {
            rejected += 1;
            ensure(diagnostics_located(&ds), || {
                format!("rejection without location for {:?}: {ds:?}", String::from_utf8_lossy(input))
            })?;
        }
    }

    for k in 0..100 {
        let fsm = random_machine(&mut rng, k);
        let text = render_assemblage(&fsm).map_err(|e| format!("render machine {k}: {e}"))?;
        let back = compile_source(&text).map_err(|d| format!("recompile machine {k}: {d:?}\n{text}"))?;
        ensure(back == fsm, || format!("machine {k} changed in round trip:\n{text}"))?;
    }
    Ok(format!("{} inputs ({rejected} rejected, all located), 100 round trips", inputs.len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("reference tables", criterion_1),
        ("gradient oracle", criterion_2),
        ("repulsive branches", criterion_3),
        ("determinism", criterion_4),
        ("foraging completion", criterion_5),
        ("soccer behavior", criterion_6),
        ("attack snapshot", criterion_7),
        ("parser robustness", criterion_8),
    ];
    let results: Vec<(Outcome, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|(_, f)| {
                s.spawn(move || {
                    let t = Instant::now();
                    let r = catch_unwind(*f).unwrap_or_else(|_| Err("panicked".into()));
                    (r, t.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("criterion thread")).collect()
    });
    let mut failed = 0;
    for (i, ((name, _), (result, secs))) in criteria.iter().zip(results).enumerate() {
        match result {
            Ok(detail) => println!("criterion {} ({name}): PASS [{secs:.1}s] {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL [{secs:.1}s] {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
