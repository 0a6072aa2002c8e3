import { HttpApi } from './api.js';
import { Preview } from './audio.js';
import { StudioController } from './controls.js';
import { renderPianoroll } from './pianoroll.js';
import type { StudioState } from './state.js';
import { SCALE_MAX, SCALE_MIN, type ServiceConfig } from './types.js';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing #${id}`);
  }
  return node as T;
}

function streamKinds(config: ServiceConfig): string[] {
  if (config.mode === 'drums2') {
    return ['drums'];
  }
  return config.num_streams === 3 ? ['melody', 'bass', 'drums'] : ['melody'];
}

function fmt(value: number | undefined): string {
  return value === undefined ? '-' : value.toFixed(3);
}

async function boot(): Promise<void> {
  const base = new URLSearchParams(location.search).get('api') ?? location.origin;
  const api = new HttpApi(base);
  const config = await api.config();
  const kinds = streamKinds(config);
  el<HTMLElement>('model-info').textContent =
    `${config.mode} | ${config.seq_len} steps | latent ${config.latent_dim} | ${config.checkpoint}`;

  const controller = new StudioController(api);
  const preview = new Preview();

  const roll = el<HTMLDivElement>('pianoroll');
  const banner = el<HTMLDivElement>('error-banner');
  const readouts = el<HTMLDivElement>('attr-readouts');

  controller.onChange = (state: StudioState) => {
    if (state.displayed) {
      roll.innerHTML = renderPianoroll(state.displayed, kinds, config.steps_per_bar, state.transportStep || null);
    }
    banner.style.display = state.error ? 'block' : 'none';
    banner.textContent = state.error ?? '';
    const lines = config.attribute_kinds.map((kind) => `${kind}: ${fmt(state.measures?.[kind])}`);
    readouts.textContent = lines.join('   ');
    el<HTMLElement>('alpha-value').textContent = state.alpha.toFixed(2);
  };

  const alphaSlider = el<HTMLInputElement>('alpha');
  alphaSlider.addEventListener('input', () => {
    controller.onAlphaInput(Number(alphaSlider.value));
  });

  const sliderBox = el<HTMLDivElement>('attr-sliders');
  for (const kind of config.attribute_kinds) {
    const row = document.createElement('div');
    const label = document.createElement('label');
    label.textContent = kind;
    const slider = document.createElement('input');
    slider.type = 'range';
    slider.min = String(SCALE_MIN);
    slider.max = String(SCALE_MAX);
    slider.step = '0.05';
    slider.value = '0';
    slider.addEventListener('input', () => {
      controller.onScaleInput(kind, Number(slider.value));
    });
    row.append(label, slider);
    sliderBox.append(row);
  }

  el<HTMLButtonElement>('load-pair').addEventListener('click', () => {
    void controller.loadSamplePair();
  });
  el<HTMLButtonElement>('play').addEventListener('click', () => {
    const tokens = controller.state.displayed;
    if (!tokens) {
      return;
    }
    preview.onStep = (step) => controller.dispatch({ type: 'set-transport', step });
    preview.play(tokens, kinds);
  });
  el<HTMLButtonElement>('stop').addEventListener('click', () => {
    preview.stop();
    controller.dispatch({ type: 'set-transport', step: 0 });
  });
  const seedInput = el<HTMLInputElement>('seed');
  seedInput.addEventListener('change', () => {
    controller.setSeed(Number(seedInput.value) || 0);
  });
  el<HTMLButtonElement>('dismiss-error').addEventListener('click', () => {
    controller.dispatch({ type: 'dismiss-error' });
  });
}

boot().catch((err) => {
  const banner = document.getElementById('error-banner');
  if (banner) {
    banner.style.display = 'block';
    banner.textContent = `failed to reach the service: ${err}`;
  }
});
