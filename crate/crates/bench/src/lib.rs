//! Fixtures shared by the benchmarks.

use softorder::mtl::{CoreKind, DecoderKind, EncoderKind, ModelSpec, MultitaskModel, OrderingSpec};
use softorder::tasks::{gen_random_tasks, RandomTaskSpec, TaskDataset};
use softorder::{Activation, Gate, Real, Rng, Tensor};

/// Tensor of the given shape with entries uniform in `[-1, 1)`.
pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = Rng::seed_from(seed);
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.uniform_range(-1.0, 1.0) as Real).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches data")
}

pub fn orderings(tasks: usize, depth: usize) -> Vec<OrderingSpec> {
    vec![
        OrderingSpec::Parallel,
        OrderingSpec::random_permuted(tasks, depth, &mut Rng::seed_from(7)),
        OrderingSpec::Soft {
            gate: Gate::Softmax,
            include_identity: false,
        },
    ]
}

/// Two random tasks in `R^m` with a shared sigmoid head and a dense core.
pub fn dense_model(m: usize, depth: usize, ordering: OrderingSpec) -> MultitaskModel {
    let spec = ModelSpec {
        depth,
        core: CoreKind::Dense {
            units: m,
            activation: Activation::Relu,
        },
        core_input: vec![m],
        encoders: vec![EncoderKind::Identity],
        task_encoder: vec![0, 0],
        decoders: vec![DecoderKind::DenseSigmoid { outputs: 1 }],
        task_decoder: vec![0, 0],
        ordering,
        dropout: 0.0,
    };
    MultitaskModel::new(spec, &mut Rng::seed_from(1)).expect("valid spec")
}

/// Two conv tasks on `[filters, size, size]` inputs.
pub fn conv_model(filters: usize, size: usize, depth: usize, ordering: OrderingSpec) -> MultitaskModel {
    let spec = ModelSpec::unshared(
        depth,
        CoreKind::Conv {
            filters,
            activation: Activation::Relu,
        },
        vec![filters, size, size],
        vec![EncoderKind::Identity; 2],
        vec![DecoderKind::DenseSoftmax { classes: 4 }; 2],
        ordering,
    );
    MultitaskModel::new(spec, &mut Rng::seed_from(1)).expect("valid spec")
}

pub fn random_tasks(m: usize, n: usize) -> Vec<TaskDataset> {
    gen_random_tasks(&RandomTaskSpec {
        m,
        n,
        tasks: 2,
        nonlinearity: Activation::Relu,
        seed: 3,
    })
    .expect("valid spec")
}
