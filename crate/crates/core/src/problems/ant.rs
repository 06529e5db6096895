//! Santa Fe artificial ant.

use super::{lex, malformed, ProblemError, Token, SANTAFE_TRAIL};

pub const SANTAFE_STEP_LIMIT: usize = 600;

#[derive(Debug, Clone, PartialEq)]
pub enum AntProgram {
    Move,
    Left,
    Right,
    IfFoodAhead(Box<AntProgram>, Box<AntProgram>),
    Progn(Vec<AntProgram>),
}

impl AntProgram {
    /// Parses `if_food_ahead ( a , b )`, `progn2 ( a , b )`,
    /// `progn3 ( a , b , c )` and the actions `move`, `left`, `right`.
    pub fn parse(phenotype: &str) -> Result<AntProgram, ProblemError> {
        let tokens = lex(phenotype)?;
        let mut pos = 0;
        let p = parse_node(&tokens, &mut pos, phenotype)?;
        if pos != tokens.len() {
            return Err(malformed(phenotype, "trailing tokens"));
        }
        Ok(p)
    }
}

fn parse_node(tokens: &[Token], pos: &mut usize, src: &str) -> Result<AntProgram, ProblemError> {
    let Some(Token::Ident(name)) = tokens.get(*pos) else {
        return Err(malformed(src, "expected an ant primitive"));
    };
    let name: &str = name;
    *pos += 1;
    let arity = match name {
        "move" => return Ok(AntProgram::Move),
        "left" => return Ok(AntProgram::Left),
        "right" => return Ok(AntProgram::Right),
        "if_food_ahead" | "progn2" => 2,
        "progn3" => 3,
        other => return Err(malformed(src, format!("unknown primitive `{other}`"))),
    };
    let mut args = Vec::with_capacity(arity);
    if tokens.get(*pos) != Some(&Token::LParen) {
        return Err(malformed(src, "expected `(`"));
    }
    *pos += 1;
    for k in 0..arity {
        if k > 0 {
            if tokens.get(*pos) != Some(&Token::Comma) {
                return Err(malformed(src, "expected `,`"));
            }
            *pos += 1;
        }
        args.push(parse_node(tokens, pos, src)?);
    }
    if tokens.get(*pos) != Some(&Token::RParen) {
        return Err(malformed(src, "expected `)`"));
    }
    *pos += 1;
    Ok(if name == "if_food_ahead" {
        let mut it = args.into_iter();
        AntProgram::IfFoodAhead(Box::new(it.next().unwrap()), Box::new(it.next().unwrap()))
    } else {
        AntProgram::Progn(args)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    fn left(self) -> Heading {
        match self {
            Heading::North => Heading::West,
            Heading::West => Heading::South,
            Heading::South => Heading::East,
            Heading::East => Heading::North,
        }
    }

    fn right(self) -> Heading {
        match self {
            Heading::North => Heading::East,
            Heading::East => Heading::South,
            Heading::South => Heading::West,
            Heading::West => Heading::North,
        }
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Heading::North => (-1, 0),
            Heading::East => (0, 1),
            Heading::South => (1, 0),
            Heading::West => (0, -1),
        }
    }
}

/// Toroidal grid of food pellets.
#[derive(Debug, Clone, PartialEq)]
pub struct AntWorld {
    pub rows: usize,
    pub cols: usize,
    pub food: Vec<bool>,
    pub start: (usize, usize, Heading),
    pub step_limit: usize,
    pub total_food: usize,
}

impl AntWorld {
    /// Parses a rectangular trail of `#` (food) and `.` (empty).
    pub fn from_trail(text: &str, start: (usize, usize, Heading), step_limit: usize) -> Result<AntWorld, ProblemError> {
        let lines: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
        let rows = lines.len();
        let cols = lines.first().map_or(0, |l| l.chars().count());
        if rows == 0 || cols == 0 {
            return Err(ProblemError::BadTrail("empty trail".into()));
        }
        let mut food = Vec::with_capacity(rows * cols);
        for (r, line) in lines.iter().enumerate() {
            if line.chars().count() != cols {
                return Err(ProblemError::BadTrail(format!("row {r} is not {cols} wide")));
            }
            for c in line.chars() {
                match c {
                    '#' => food.push(true),
                    '.' => food.push(false),
                    other => return Err(ProblemError::BadTrail(format!("unexpected `{other}` in row {r}"))),
                }
            }
        }
        if start.0 >= rows || start.1 >= cols {
            return Err(ProblemError::BadTrail("start outside the grid".into()));
        }
        let total_food = food.iter().filter(|&&f| f).count();
        Ok(AntWorld { rows, cols, food, start, step_limit, total_food })
    }

    /// The 32×32 Santa Fe trail: 89 pellets, start at (0, 0) facing east.
    pub fn santa_fe() -> AntWorld {
        AntWorld::from_trail(SANTAFE_TRAIL, (0, 0, Heading::East), SANTAFE_STEP_LIMIT)
            .expect("bundled trail is well formed")
    }
}

struct Ant<'w> {
    world: &'w AntWorld,
    food: Vec<bool>,
    row: usize,
    col: usize,
    heading: Heading,
    steps: usize,
    eaten: usize,
}

impl Ant<'_> {
    fn ahead(&self) -> usize {
        let (dr, dc) = self.heading.delta();
        let r = (self.row as isize + dr).rem_euclid(self.world.rows as isize) as usize;
        let c = (self.col as isize + dc).rem_euclid(self.world.cols as isize) as usize;
        r * self.world.cols + c
    }

    fn done(&self) -> bool {
        self.steps >= self.world.step_limit
    }

    fn exec(&mut self, p: &AntProgram) {
        if self.done() {
            return;
        }
        match p {
            AntProgram::Move => {
                let cell = self.ahead();
                self.row = cell / self.world.cols;
                self.col = cell % self.world.cols;
                if self.food[cell] {
                    self.food[cell] = false;
                    self.eaten += 1;
                }
                self.steps += 1;
            }
            AntProgram::Left => {
                self.heading = self.heading.left();
                self.steps += 1;
            }
            AntProgram::Right => {
                self.heading = self.heading.right();
                self.steps += 1;
            }
            AntProgram::IfFoodAhead(then, other) => {
                if self.food[self.ahead()] {
                    self.exec(then)
                } else {
                    self.exec(other)
                }
            }
            AntProgram::Progn(body) => {
                for p in body {
                    self.exec(p);
                }
            }
        }
    }
}

/// Runs `program` repeatedly until the step budget is spent and returns the
/// number of pellets left.
pub fn run_ant(program: &AntProgram, world: &AntWorld) -> f64 {
    let (row, col, heading) = world.start;
    let mut ant = Ant { world, food: world.food.clone(), row, col, heading, steps: 0, eaten: 0 };
    if ant.food[row * world.cols + col] {
        ant.food[row * world.cols + col] = false;
        ant.eaten += 1;
    }
    while !ant.done() {
        let before = ant.steps;
        ant.exec(program);
        if ant.steps == before {
            break;
        }
    }
    (world.total_food - ant.eaten) as f64
}
