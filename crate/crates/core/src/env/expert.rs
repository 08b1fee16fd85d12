use super::grid::Cell;
use super::sim::MiniRearrange;
use super::state::{Action, EnvState};
use super::task::TaskId;

/// Hand-coded shortest-path expert. Uses privileged state, so it solves every
/// task whenever the step budget allows.
#[derive(Debug, Clone)]
pub struct ScriptedExpert {
    env: MiniRearrange,
}

enum Goal {
    Interact(Cell, Action),
    Idle,
}

impl ScriptedExpert {
    pub fn new(env: MiniRearrange) -> Self {
        ScriptedExpert { env }
    }

    fn goal(&self, s: &EnvState) -> Goal {
        let spec = self.env.spec();
        let pick_or_open = || {
            if self.env.object_accessible(s) {
                Goal::Interact(s.object_pos, Action::Pick)
            } else {
                Goal::Interact(spec.container_cell, Action::Open)
            }
        };
        match s.task {
            TaskId::MAIN => {
                if s.holding {
                    Goal::Interact(spec.goal_cell, Action::Place)
                } else {
                    pick_or_open()
                }
            }
            TaskId::PLACE if s.holding => Goal::Interact(spec.goal_cell, Action::Place),
            TaskId::PICK | TaskId::PICK_FROM_CONTAINER if !s.holding => pick_or_open(),
            TaskId::OPEN_CONTAINER if !s.container_open => Goal::Interact(spec.container_cell, Action::Open),
            _ => Goal::Idle,
        }
    }

    pub fn act(&self, s: &EnvState) -> usize {
        let (target, interact) = match self.goal(s) {
            Goal::Interact(t, a) => (t, a),
            Goal::Idle => return Action::Open.index(),
        };
        if s.agent_pos.chebyshev(target) <= 1 {
            return interact.index();
        }
        let grid = self.env.grid();
        let region: Vec<Cell> = grid.free_cells().iter().copied().filter(|c| c.chebyshev(target) <= 1).collect();
        let field = grid.bfs(&region);
        let here = grid.field_at(&field, s.agent_pos);
        Action::ALL[..4]
            .iter()
            .copied()
            .find(|a| {
                let (dx, dy) = a.delta().unwrap();
                let to = s.agent_pos.offset(dx, dy);
                grid.passable(to) && grid.field_at(&field, to) < here
            })
            .expect("connected grid always has a downhill move")
            .index()
    }
}
