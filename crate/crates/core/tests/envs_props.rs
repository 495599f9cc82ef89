use proptest::prelude::*;
use skillforge::envs::{box2d_reset, box2d_step, Action, EnvKind, GridWorld};
use skillforge::runner::RunConfig;

proptest! {
    #[test]
    fn navigation_stays_in_unit_square(actions in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 100)) {
        let mut s = box2d_reset();
        for (ax, ay) in actions {
            s = box2d_step(&s, &[ax, ay]);
            prop_assert!(s.observation.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        prop_assert_eq!(s.step_index, 100);
    }

    #[test]
    fn navigation_step_is_deterministic(
        x in 0.0..=1.0f64, y in 0.0..=1.0f64, ax in -0.2..0.2f64, ay in -0.2..0.2f64,
    ) {
        let mut s = box2d_reset();
        s.observation = vec![x, y];
        let a = box2d_step(&s, &[ax, ay]);
        let b = box2d_step(&s, &[ax, ay]);
        prop_assert_eq!(a.observation[0].to_bits(), b.observation[0].to_bits());
        prop_assert_eq!(a.observation[1].to_bits(), b.observation[1].to_bits());
    }

    #[test]
    fn grid_stays_on_the_board(actions in prop::collection::vec(0usize..5, 100)) {
        let env = EnvKind::Gridworld.build();
        let grid = GridWorld::default();
        let mut s = env.reset();
        for a in actions {
            s = env.step(&s, &Action::Discrete(a)).unwrap();
            let (r, c) = grid.cell_of(&s).unwrap();
            prop_assert!(r < grid.size() && c < grid.size());
        }
        prop_assert!(env.is_episode_over(&s));
    }
}

#[test]
fn navigation_episode_is_one_hundred_steps() {
    let env = EnvKind::Box2d.build();
    let mut s = env.reset();
    let mut steps = 0;
    while !env.is_episode_over(&s) {
        s = env
            .step(&s, &Action::Continuous(vec![0.01, -0.01]))
            .unwrap();
        steps += 1;
    }
    assert_eq!(steps, 100);
    let cfg = RunConfig::default();
    assert_eq!(cfg.steps_per_epoch / env.episode_len(), 10);
}
