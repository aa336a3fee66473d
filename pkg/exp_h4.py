"""Scratch experiment runner (not part of the package)."""
import sys
import time

import numpy as np

import tbvmc as tv
from tbvmc.local_energy import energy_estimate, local_energy_exact
from tbvmc.optimizers import (AdamState, JacobianBatch, MarchHyper, MarchState,
                              WorkerPartition, adam_step, march_step, sgd_gradient)
from tbvmc.oracle import build_dense, ground_state
from tbvmc.sampler import ChainEnsemble, ensemble_rngs


def run2(tag, fix, ne, nso, tok, d_f, n_det, adam_steps, adam_lr, total, seed,
         eta, lam, c, B=256, beta2=0.995):
    ints = tv.parse_fcidump(open(f'tests/fixtures/{fix}.fcidump').read())
    sector = tv.SpinSector(ne, 0)
    e0, _ = ground_state(build_dense(ints, sector))
    cfg = tv.AnsatzConfig(t=tok, d_f=d_f, l_e=2, n_h=4, d_atten=d_f, l_m=2, d_mlp=d_f, n_det=n_det)
    net = tv.BackflowNet(nso, ne, cfg, seed=seed)
    n_chains, thin = 64, nso
    ens = ChainEnsemble(net, sector, nso // 2, n_chains, ensemble_rngs(seed, 0, 0, n_chains))
    ens.advance(10 * nso)
    theta = net.get_flat()
    adam = AdamState.fresh(net.n_params, lr=adam_lr)
    march = MarchState.fresh(net.n_params, MarchHyper(eta=eta, lam=lam, norm_constraint=c, beta2=beta2))
    part = WorkerPartition(1)
    t0 = time.time()
    trace = []
    for step in range(1, total + 1):
        ens.rngs = ensemble_rngs(seed, 1, step, n_chains)
        batch, acc = ens.record(thin, B // n_chains)
        rep = local_energy_exact(batch, ints, net)
        mean, err = energy_estimate(rep)
        trace.append(mean)
        _, _, O_u = net.log_grad_batch(batch.unique)
        jb = JacobianBatch.from_raw(batch.expand(O_u), batch.expand(rep.values))
        if step <= adam_steps:
            theta = adam_step(theta, adam, sgd_gradient(jb))
        else:
            theta, march, info = march_step(theta, march, jb, part)
        net.set_flat(theta)
        ens.refresh_amplitudes()
        if step % 300 == 0:
            w = np.array(trace[-200:])
            print(f'  [{tag}] {step} E={mean:.7f} tail200={(w.mean()-e0)*1000:+.3f} '
                  f'worst200={(w.max()-e0)*1000:+.2f} mHa', flush=True)
    w = np.array(trace[-200:])
    print(f'{tag}: tail dE={(w.mean()-e0)*1000:+.4f} mHa worst={(w.max()-e0)*1000:+.2f} '
          f'wall={time.time()-t0:.0f}s', flush=True)


RUNS = {
    'G': lambda: run2('G t2D4 march default', 'h4_chain_sto3g', 4, 8, 2, 16, 4, 400, 3e-3, 2400, 11, 0.1, 1e-3, 0.1),
    'H': lambda: run2('H t2D4 gentle', 'h4_chain_sto3g', 4, 8, 2, 16, 4, 400, 3e-3, 2400, 11, 0.03, 3e-3, 0.03),
    'I': lambda: run2('I t2D4 eta.05 lam.01', 'h4_chain_sto3g', 4, 8, 2, 16, 4, 600, 3e-3, 2400, 11, 0.05, 1e-2, 0.05),
    'J': lambda: run2('J hub t2D4', 'hubbard_2x2_u4', 4, 8, 2, 16, 4, 300, 1e-2, 2000, 11, 0.05, 3e-3, 0.05),
    'K': lambda: run2('K t2D6 s5', 'h4_chain_sto3g', 4, 8, 2, 16, 6, 400, 3e-3, 2000, 5, 0.1, 1e-3, 0.1),
    'L': lambda: run2('L t2D4 adamonly', 'h4_chain_sto3g', 4, 8, 2, 16, 4, 2400, 3e-3, 2400, 11, 0.1, 1e-3, 0.1),
}

if __name__ == '__main__':
    RUNS[sys.argv[1]]()
