// Browser entry point. Paints the view model into the page and wires pointer
// interactions: click a free site to place a module, click a marker to select
// it, click another site to drag it there, double-click a marker to remove.

import { ApiClient, SocketLike } from './client.js';
import { Studio } from './studio.js';
import type { MarkerView, SiteView, ViewModel } from './render.js';

const HEAT_COLORS = ['#555a60', '#c0392b', '#e67e22', '#2e9e5b', '#1c7ed6'];

function apiBase(): string {
  const override = new URLSearchParams(window.location.search).get('api');
  return override ?? window.location.origin;
}

function wsBase(http: string): string {
  return http.replace(/^http/, 'ws');
}

function sessionId(): string {
  const key = 'eknit-studio-session';
  let sid = window.sessionStorage.getItem(key);
  if (!sid) {
    sid = `studio-${Math.random().toString(36).slice(2, 10)}`;
    window.sessionStorage.setItem(key, sid);
  }
  return sid;
}

const SCALE = 6; // px per cm
const PAD = 30;

function svgSite(s: SiteView): string {
  const cx = PAD + s.x_cm * SCALE;
  const cy = PAD + (170 - s.y_cm) * SCALE;
  const color = HEAT_COLORS[Math.min(s.heat, HEAT_COLORS.length - 1)];
  const ring = s.selected ? 'stroke="#fff" stroke-width="3"' : 'stroke="#222"';
  const shape = s.isHub
    ? `<rect x="${cx - 8}" y="${cy - 8}" width="16" height="16" fill="${color}" ${ring} data-site="${s.site}"/>`
    : `<circle cx="${cx}" cy="${cy}" r="8" fill="${color}" ${ring} data-site="${s.site}"/>`;
  const label = `<text x="${cx}" y="${cy + 22}" font-size="9" text-anchor="middle" fill="#aaa">${s.site}</text>`;
  return shape + label;
}

function svgMarker(m: MarkerView): string {
  const cx = PAD + m.x_cm * SCALE;
  const cy = PAD + (170 - m.y_cm) * SCALE;
  const opacity = m.state === 'pending' ? 0.45 : 1.0;
  const ring = m.selected ? 'stroke="#ffd43b" stroke-width="3"' : 'stroke="#000"';
  return (
    `<rect x="${cx - 6}" y="${cy - 6}" width="12" height="12" rx="2" ` +
    `fill="#f5f5f5" opacity="${opacity}" ${ring} data-marker="${m.key}"/>` +
    `<text x="${cx}" y="${cy - 10}" font-size="9" text-anchor="middle" fill="#ddd">` +
    `0x${m.address.toString(16)}</text>`
  );
}

function paint(vm: ViewModel, root: HTMLElement): void {
  const canvas = root.querySelector('#canvas') as HTMLElement;
  const parts: string[] = [];
  for (const s of vm.sites) parts.push(svgSite(s));
  for (const m of vm.markers) parts.push(svgMarker(m));
  for (const g of vm.ghosts) {
    const site = vm.sites.find((s) => s.site === g.site);
    if (!site) continue;
    const cx = PAD + site.x_cm * SCALE;
    const cy = PAD + (170 - site.y_cm) * SCALE;
    parts.push(
      `<rect x="${cx - 6}" y="${cy - 6}" width="12" height="12" rx="2" ` +
        `fill="none" stroke="#777" stroke-dasharray="3,2"/>`,
    );
  }
  canvas.innerHTML =
    `<svg width="${PAD * 2 + 110 * SCALE}" height="${PAD * 2 + 90 * SCALE}">` +
    parts.join('') +
    '</svg>';

  const scanEl = root.querySelector('#scan') as HTMLElement;
  scanEl.innerHTML =
    '<h3>Bus scan</h3>' +
    '<table><tr><th>addr</th><th>site</th><th>margin</th></tr>' +
    vm.scanPanel.rows
      .map(
        (r) =>
          `<tr><td>0x${r.address.toString(16)}</td><td>${r.site}</td>` +
          `<td>${r.marginLabel}</td></tr>`,
      )
      .join('') +
    '</table>' +
    (vm.faults.length
      ? `<p class="fault">faults: ${vm.faults.map((f) => `${f.id} ${f.kind} ${f.group_id}`).join(', ')}</p>`
      : '');

  const motionEl = root.querySelector('#motion-result') as HTMLElement;
  motionEl.textContent = vm.motionPanel
    ? `${vm.motionPanel.motion}: ${vm.motionPanel.survived}/${vm.motionPanel.total} intact`
    : '';

  const placementEl = root.querySelector('#placement') as HTMLElement;
  if (vm.placementPanel) {
    const max = Math.max(...vm.placementPanel.bars.map((b) => b.mpjre_deg));
    placementEl.innerHTML =
      '<h3>Placement error</h3>' +
      vm.placementPanel.bars
        .map((b) => {
          const w = Math.round((b.mpjre_deg / max) * 180);
          const cls = b.highlighted ? 'bar best' : 'bar';
          return (
            `<div class="${cls}"><span style="width:${w}px"></span>` +
            `#${b.index} ${b.region} ${b.mpjre_deg.toFixed(2)}°</div>`
          );
        })
        .join('');
  } else {
    placementEl.innerHTML = '';
  }

  const toastEl = root.querySelector('#toasts') as HTMLElement;
  toastEl.innerHTML = vm.toasts
    .map((t, i) => `<div class="toast ${t.kind}" data-toast="${i}">${t.text}</div>`)
    .join('');
}

async function bootstrap(): Promise<void> {
  const root = document.body;
  const base = apiBase();
  const sid = sessionId();
  const client = new ApiClient(base, sid);
  const studio = await Studio.boot(
    client,
    wsBase(base),
    sid,
    // the DOM handler signatures are narrower than the injectable surface
    (url) => new WebSocket(url) as unknown as SocketLike,
  );

  const repaint = () => paint(studio.view(), root);
  studio.onChange(repaint);
  repaint();

  root.querySelector('#canvas')!.addEventListener('click', (ev) => {
    const target = ev.target as Element;
    const markerKey = target.getAttribute('data-marker');
    if (markerKey) {
      studio.select(studio.ui.selection === markerKey ? null : markerKey);
      return;
    }
    const site = target.getAttribute('data-site');
    if (!site) return;
    const vm = studio.view();
    const occupied = vm.markers.some((m) => m.site === site);
    const selected = studio.ui.selection;
    if (selected && selected in studio.store.state.modules) {
      void studio.dragModule(selected, site).then(repaint);
      studio.select(null);
    } else if (!occupied) {
      void studio.placeModule(site).then(repaint);
    } else {
      studio.select(site);
    }
  });

  root.querySelector('#canvas')!.addEventListener('dblclick', (ev) => {
    const key = (ev.target as Element).getAttribute('data-marker');
    if (key && key in studio.store.state.modules) {
      void studio.removeModule(key).then(repaint);
    }
  });

  for (const motion of ['walking', 'running', 'jumping', 'rotating']) {
    root
      .querySelector(`#btn-${motion}`)
      ?.addEventListener('click', () => void studio.runMotion(motion).then(repaint));
  }
  root
    .querySelector('#btn-eval')
    ?.addEventListener('click', () => void studio.runPlacementEval().then(repaint));
  root.querySelector('#btn-fault')?.addEventListener('click', () => {
    void studio
      .injectFault({
        kind: 'short_adjacent',
        channels: [2, 3],
        group_id: 'sleeve',
        x_start_cm: 30,
        x_end_cm: 40,
      })
      .then(repaint);
  });
  root.querySelector('#btn-clear-faults')?.addEventListener('click', () => {
    for (const f of studio.view().faults) void studio.clearFault(f.id).then(repaint);
  });
  root.querySelector('#toasts')?.addEventListener('click', (ev) => {
    const idx = (ev.target as Element).getAttribute('data-toast');
    if (idx !== null) studio.dismissToast(Number(idx));
  });
}

void bootstrap();
